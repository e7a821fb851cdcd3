#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "deltaenum/bench.hpp"
#include "deltaenum/engine_dynamic.hpp"
#include "deltaenum/engine_static.hpp"
#include "deltaenum/errors.hpp"
#include "deltaenum/generators.hpp"
#include "deltaenum/kdata.hpp"
#include "deltaenum/matlang.hpp"
#include "deltaenum/oracle.hpp"
#include "deltaenum/planner.hpp"
#include "deltaenum/query.hpp"

using namespace deltaenum;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
using Entries = std::vector<std::pair<Tuple, Value>>;

constexpr double kVerifyTol = 1e-9;
const char* kDefaultBenchQuery = "H(x,y) :- R(x,y), S(y,z), T(y).";
const char* kDefaultDynBenchQuery = "H(x) :- A(x,y), U(x).";

struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// raised once output is written, so the report still reaches stdout
struct VerificationFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string semiring = "natural";
  bool verify = false;
  bool json = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--semiring", c.semiring, "boolean | natural | real | tropical-min")->capture_default_str();
  sub->add_flag("--verify", c.verify, "cross-check against the brute-force oracle");
  sub->add_flag("--json", c.json, "machine-readable report on stdout");
}

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

// file:line:col for a parse error at a character offset
[[noreturn]] void rethrow_located(const ParseError& e, const std::string& file, const std::string& text) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < e.position() && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  std::string what = e.what();
  auto colon = what.find(": ");
  if (colon != std::string::npos) what = what.substr(colon + 2);
  throw UserError(file + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
}

using AnyQuery = std::variant<ConjunctiveQuery, FoQuery>;

AnyQuery load_query(const std::string& file) {
  std::string text = read_file(file);
  try {
    try {
      return parse_query(text);
    } catch (const NotConjunctiveError&) {
      return parse_formula(text);
    }
  } catch (const ParseError& e) {
    rethrow_located(e, file, text);
  }
}

ConjunctiveQuery load_cq(const std::string& file) {
  auto q = load_query(file);
  if (auto* cq = std::get_if<ConjunctiveQuery>(&q)) return *cq;
  throw UserError(file + ": query uses disjunction; only eval supports FO+ queries");
}

Database load_db(const std::string& dir, const std::string& vocab, const Semiring& s) {
  fs::path v = vocab.empty() ? fs::path(dir) / "vocab.json" : fs::path(vocab);
  if (!fs::exists(v)) throw UserError(v.string() + ": vocabulary file not found");
  return load_database(load_vocabulary(v), dir, s);
}

json value_json(const Semiring& s, Value v) {
  switch (s.kind()) {
    case SemiringKind::Boolean: return v.as_bool();
    case SemiringKind::Natural: return v.as_natural();
    case SemiringKind::Real: return v.as_real();
    case SemiringKind::TropicalMin:
      if (std::isinf(v.as_real())) return s.format(v);
      return v.as_real();
  }
  return nullptr;
}

json entry_json(const Semiring& s, const Tuple& t, Value v) { return {{"tuple", t}, {"annotation", value_json(s, v)}}; }

std::string csv_row(const Semiring& s, const Tuple& t, Value v) {
  std::string out;
  for (Datum d : t) out += std::to_string(d) + ",";
  return out + s.format(v);
}

/** Writes rows as csv or jsonl, or collects them for a --json report. */
class Sink {
 public:
  Sink(const Semiring& s, std::string format, bool report) : s_(s), format_(std::move(format)), report_(report) {
    if (format_ != "csv" && format_ != "jsonl") throw UserError("--out must be csv or jsonl");
  }
  void row(const Tuple& t, Value v) {
    if (report_)
      rows_.push_back(entry_json(s_, t, v));
    else if (format_ == "csv")
      std::cout << csv_row(s_, t, v) << "\n";
    else
      std::cout << entry_json(s_, t, v).dump() << "\n";
  }
  void comment(const std::string& text) {
    if (!report_ && format_ == "csv") std::cout << "# " << text << "\n";
  }
  json take() { return std::exchange(rows_, json::array()); }

 private:
  const Semiring& s_;
  std::string format_;
  bool report_;
  json rows_ = json::array();
};

bool same_entries(const Entries& a, const Entries& b, const Semiring& s) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].first != b[i].first || !s.approx_equal(a[i].second, b[i].second, kVerifyTol)) return false;
  return true;
}

Entries drain_sorted(Enumerator e) {
  Entries out;
  while (e.next()) out.emplace_back(e.tuple(), e.annotation());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

json classification_json(const Classification& c) {
  return {{"acyclic", c.acyclic},
          {"free_connex", c.free_connex},
          {"q_hierarchical", c.q_hierarchical},
          {"constant_disjoint", c.constant_disjoint},
          {"self_join_free", c.self_join_free}};
}

void emit(const json& report) { std::cout << report.dump(2) << "\n"; }

// ---- classify ----

struct ClassifyArgs {
  Common c;
  std::string query;
};

int run_classify(const ClassifyArgs& a) {
  auto any = load_query(a.query);
  if (auto* fo = std::get_if<FoQuery>(&any)) {
    if (a.c.json)
      emit({{"query", to_string(*fo)}, {"conjunctive", false}});
    else
      std::cout << "conjunctive: false\n";
    return 0;
  }
  const auto& q = std::get<ConjunctiveQuery>(any);
  auto c = classify(q);
  std::optional<std::string> mismatch;
  if (a.c.verify) {
    if (c.free_connex != build_fc_ghd(q).has_value()) mismatch = "free-connex flag disagrees with GHD construction";
    if (c.q_hierarchical != build_guarded_plan(q).has_value())
      mismatch = "q-hierarchical flag disagrees with guarded plan construction";
  }
  if (a.c.json) {
    json r = {{"query", to_string(q)}, {"conjunctive", true}, {"classification", classification_json(c)}};
    if (!c.constant_disjoint) r["constant_disjoint_reason"] = c.constant_disjoint_reason;
    if (a.c.verify) r["verified"] = !mismatch;
    emit(r);
  } else {
    auto yn = [](bool b) { return b ? "true" : "false"; };
    std::cout << "conjunctive: true\n"
              << "acyclic: " << yn(c.acyclic) << "\n"
              << "free-connex: " << yn(c.free_connex) << "\n"
              << "q-hierarchical: " << yn(c.q_hierarchical) << "\n"
              << "constant-disjoint: " << yn(c.constant_disjoint) << "\n"
              << "self-join-free: " << yn(c.self_join_free) << "\n";
    if (!c.constant_disjoint) std::cout << "constant-disjoint reason: " << c.constant_disjoint_reason << "\n";
  }
  if (mismatch) throw VerificationFailed(*mismatch);
  return 0;
}

// ---- plan ----

struct PlanArgs {
  Common c;
  std::string query;
  bool dot = false;
  bool guarded = false;
};

int run_plan(const PlanArgs& a) {
  auto q = load_cq(a.query);
  std::optional<Ghd> ghd;
  std::optional<QueryPlan> plan;
  if (a.guarded) {
    plan = build_guarded_plan(q);
    if (!plan) throw ClassificationError("query is not q-hierarchical: " + to_string(q));
  } else {
    ghd = build_fc_ghd(q);
    if (!ghd) throw ClassificationError("query is not free-connex: " + to_string(q));
    plan = ghd_to_plan(*ghd, q);
  }
  std::vector<std::string> problems;
  if (a.c.verify) {
    if (ghd)
      for (auto& p : check_ghd(*ghd, q)) problems.push_back("ghd: " + p);
    for (auto& p : check_plan(*plan, q)) problems.push_back("plan: " + p);
  }
  if (a.dot) {
    std::cout << plan_to_dot(*plan);
  } else {
    json r = {{"query", to_string(q)}, {"plan", plan_to_json(*plan)}};
    if (ghd) r["ghd"] = ghd_to_json(*ghd);
    if (a.c.verify) r["verified"] = problems.empty();
    emit(r);
  }
  if (!problems.empty()) throw VerificationFailed(problems.front());
  return 0;
}

// ---- eval / enumerate ----

struct EvalArgs {
  Common c;
  std::string query;
  std::string db;
  std::string vocab;
  std::optional<std::size_t> limit;
  std::string out = "csv";
};

int run_eval(const EvalArgs& a, bool streaming) {
  auto s = builtin_semiring(a.c.semiring);
  auto any = load_query(a.query);
  auto t0 = Clock::now();
  Database db = load_db(a.db, a.vocab, s);
  double load_s = since(t0);
  Sink sink(s, a.out, a.c.json);
  json report = {{"command", streaming ? "enumerate" : "eval"}, {"semiring", s.name()}};
  json timing = {{"load_seconds", load_s}};
  std::size_t limit = a.limit.value_or(std::numeric_limits<std::size_t>::max());
  std::size_t printed = 0;
  bool truncated = false;
  std::optional<std::string> mismatch;

  auto print_all = [&](const Entries& rows) {
    for (const auto& [t, v] : rows) {
      if (printed == limit) {
        truncated = true;
        break;
      }
      sink.row(t, v);
      ++printed;
    }
  };

  if (auto* fo = std::get_if<FoQuery>(&any)) {
    if (streaming) throw UserError(a.query + ": enumerate needs a conjunctive query");
    warn("query uses disjunction; evaluating with the brute-force oracle");
    report["query"] = to_string(*fo);
    report["route"] = "oracle";
    auto t1 = Clock::now();
    auto result = oracle_eval_query(*fo, db);
    timing["evaluate_seconds"] = since(t1);
    print_all(result.sorted_entries());
  } else {
    const auto& q = std::get<ConjunctiveQuery>(any);
    report["query"] = to_string(q);
    auto cls = classify(q);
    report["classification"] = classification_json(cls);
    Entries full;
    if (cls.free_connex) {
      report["route"] = "free-connex";
      auto t1 = Clock::now();
      auto st = preprocess(q, db);
      timing["preprocess_seconds"] = since(t1);
      Enumerator e(st);
      auto t2 = Clock::now(), prev = t2;
      std::uint64_t max_gap = 0;
      while (printed < limit && e.next()) {
        auto now = Clock::now();
        if (printed > 0)
          max_gap = std::max<std::uint64_t>(
              max_gap, std::chrono::duration_cast<std::chrono::nanoseconds>(now - prev).count());
        sink.row(e.tuple(), e.annotation());
        ++printed;
        prev = Clock::now();
      }
      truncated = printed == limit && e.next();
      timing["enumerate_seconds"] = since(t2);
      timing["max_gap_ns"] = max_gap;
      if (a.c.verify) full = drain_sorted(Enumerator(st));
    } else {
      if (streaming) throw ClassificationError("query is not free-connex: " + to_string(q));
      warn("query is not free-connex; using a generic join without delay guarantees");
      report["route"] = "generic-join";
      auto t1 = Clock::now();
      auto result = eval_general(q, db);
      timing["evaluate_seconds"] = since(t1);
      full = result.sorted_entries();
      print_all(full);
    }
    if (a.c.verify) {
      auto t3 = Clock::now();
      auto want = oracle_eval_cq(q, db).sorted_entries();
      timing["verify_seconds"] = since(t3);
      if (!same_entries(full, want, s))
        mismatch = "engine result differs from the oracle (" + std::to_string(full.size()) + " vs " +
                   std::to_string(want.size()) + " tuples)";
    }
  }
  if (a.c.json) {
    report["count"] = printed;
    report["truncated"] = truncated;
    report["results"] = sink.take();
    if (a.c.verify) report["verified"] = !mismatch;
    report["timing"] = timing;
    emit(report);
  }
  if (mismatch) throw VerificationFailed(*mismatch);
  return 0;
}

// ---- dyn ----

struct DynArgs {
  Common c;
  std::string query;
  std::string db;
  std::string vocab;
  std::string updates;
  bool each = false;
  std::string out = "csv";
};

std::string describe(const SingleTupleUpdate& u, const Semiring& s) {
  std::string t;
  for (Datum d : u.tuple) t += " " + std::to_string(d);
  if (u.kind == SingleTupleUpdate::Kind::Insert) return "+ " + u.relation + t + " " + s.format(u.value);
  return "- " + u.relation + t;
}

int run_dyn(const DynArgs& a) {
  auto s = builtin_semiring(a.c.semiring);
  auto q = load_cq(a.query);
  Database db = load_db(a.db, a.vocab, s);
  auto ups = parse_updates(read_file(a.updates), db, a.updates);
  Sink sink(s, a.out, a.c.json);
  json steps = json::array();
  std::optional<std::string> mismatch;

  auto t0 = Clock::now();
  DynamicState st(q, db);
  double pre = since(t0);
  auto emit_state = [&] {
    Enumerator e = st.enumerate();
    while (e.next()) sink.row(e.tuple(), e.annotation());
  };
  double update_total = 0;
  for (std::size_t i = 0; i < ups.size(); ++i) {
    auto t1 = Clock::now();
    st.update(ups[i]);
    update_total += since(t1);
    if (a.c.verify && !mismatch) {
      auto got = drain_sorted(st.enumerate());
      auto want = eval_materialized(q, st.database()).sorted_entries();
      if (!same_entries(got, want, s))
        mismatch = "maintained result differs from recomputation after update " + std::to_string(i + 1) + " (" +
                   describe(ups[i], s) + ")";
    }
    if (a.each) {
      sink.comment("after update " + std::to_string(i + 1) + ": " + describe(ups[i], s));
      emit_state();
      if (a.c.json) steps.push_back({{"update", describe(ups[i], s)}, {"results", sink.take()}});
    }
  }
  if (!a.each || a.c.json) {
    sink.comment("final");
    emit_state();
  }
  if (a.c.json) {
    json r = {{"command", "dyn"},
              {"query", to_string(q)},
              {"semiring", s.name()},
              {"updates", ups.size()},
              {"results", sink.take()}};
    if (a.each) r["steps"] = steps;
    if (a.c.verify) r["verified"] = !mismatch;
    r["timing"] = {{"preprocess_seconds", pre},
                   {"update_seconds_total", update_total},
                   {"mean_update_ns", ups.empty() ? 0.0 : update_total * 1e9 / static_cast<double>(ups.size())}};
    emit(r);
  }
  if (mismatch) throw VerificationFailed(*mismatch);
  return 0;
}

// ---- matlang ----

struct MatlangArgs {
  Common c;
  std::string expr;
  std::string schema;
  std::string data;
  bool dump_cq = false;
};

struct LoadedProgram {
  MatlangProgram program;
  MatrixSchema schema;
};

LoadedProgram load_program(const MatlangArgs& a) {
  fs::path schema = a.schema.empty() ? fs::path(a.expr).parent_path() / "schema.json" : fs::path(a.schema);
  if (!fs::exists(schema)) throw UserError(schema.string() + ": schema file not found (pass --schema)");
  LoadedProgram lp{{}, load_matrix_schema(schema)};
  std::string text = read_file(a.expr);
  try {
    lp.program = parse_matlang(text);
  } catch (const ParseError& e) {
    rethrow_located(e, a.expr, text);
  }
  try {
    typecheck(*lp.program.expr, lp.schema);
  } catch (const TypeError& e) {
    throw UserError(a.expr + ": " + e.what());
  }
  return lp;
}

json fragments_json(const FragmentFlags& f) {
  return {{"matlang", f.matlang},
          {"conj_matlang", f.conj_matlang},
          {"fc_matlang", f.fc_matlang},
          {"qh_matlang", f.qh_matlang},
          {"simple_matlang", f.simple_matlang}};
}

json matrix_json(const SparseMatrix& m, const Semiring& s) {
  json entries = json::array();
  for (const auto& [ij, v] : m.entries) entries.push_back({{"row", ij.first}, {"col", ij.second}, {"value", value_json(s, v)}});
  return {{"rows", m.rows}, {"cols", m.cols}, {"entries", entries}};
}

int run_matlang_eval(const MatlangArgs& a) {
  auto s = builtin_semiring(a.c.semiring);
  auto lp = load_program(a);
  fs::path data = a.data.empty() ? fs::path(a.expr).parent_path() : fs::path(a.data);
  auto inst = load_matrix_instance(lp.schema, data, s);
  auto t0 = Clock::now();
  auto r = eval_matlang(lp.program, inst);
  double secs = since(t0);
  for (const auto& w : r.warnings) warn(w);
  std::optional<std::string> mismatch;
  if (a.c.verify) {
    auto want = to_sparse(oracle_eval_matlang(*lp.program.expr, inst), s);
    bool ok = want.rows == r.matrix.rows && want.cols == r.matrix.cols && want.entries.size() == r.matrix.entries.size();
    for (auto it = want.entries.begin(); ok && it != want.entries.end(); ++it) {
      auto got = r.matrix.entries.find(it->first);
      ok = got != r.matrix.entries.end() && s.approx_equal(got->second, it->second, kVerifyTol);
    }
    if (!ok) mismatch = "result differs from dense evaluation";
  }
  if (a.c.json) {
    json rep = {{"command", "matlang eval"},
                {"expression", to_string(lp.program)},
                {"semiring", s.name()},
                {"type", {r.type.rows, r.type.cols}},
                {"route", r.cq ? "relational" : "direct"},
                {"free_connex", r.free_connex},
                {"q_hierarchical", r.q_hierarchical},
                {"warnings", r.warnings},
                {"matrix", matrix_json(r.matrix, s)}};
    if (r.cq) rep["cq"] = to_string(*r.cq);
    if (a.c.verify) rep["verified"] = !mismatch;
    rep["timing"] = {{"evaluate_seconds", secs}};
    emit(rep);
  } else {
    std::cout << matrix_to_coo(r.matrix, s);
  }
  if (mismatch) throw VerificationFailed(*mismatch);
  return 0;
}

int run_matlang_compile(const MatlangArgs& a) {
  auto lp = load_program(a);
  auto cq = translate_to_cq(lp.program, lp.schema);
  if (a.dump_cq && !a.c.json) {
    std::cout << to_string(cq) << "\n";
    return 0;
  }
  auto type = typecheck(*lp.program.expr, lp.schema);
  auto c = classify(cq);
  if (a.c.json) {
    emit({{"expression", to_string(lp.program)},
          {"type", {type.rows, type.cols}},
          {"cq", to_string(cq)},
          {"classification", classification_json(c)}});
  } else {
    std::cout << "expression: " << to_string(lp.program) << "\n"
              << "type: " << type.rows << " x " << type.cols << "\n"
              << "cq: " << to_string(cq) << "\n"
              << "free-connex: " << (c.free_connex ? "true" : "false") << "\n"
              << "q-hierarchical: " << (c.q_hierarchical ? "true" : "false") << "\n";
  }
  return 0;
}

int run_matlang_classify(const MatlangArgs& a) {
  auto lp = load_program(a);
  auto type = typecheck(*lp.program.expr, lp.schema);
  auto f = classify_fragment(*lp.program.expr, lp.schema);
  if (a.c.json) {
    emit({{"expression", to_string(lp.program)}, {"type", {type.rows, type.cols}}, {"fragments", fragments_json(f)}});
    return 0;
  }
  auto yn = [](bool b) { return b ? "true" : "false"; };
  std::cout << "type: " << type.rows << " x " << type.cols << "\n"
            << "matlang: " << yn(f.matlang) << "\n"
            << "conj-matlang: " << yn(f.conj_matlang) << "\n"
            << "fc-matlang: " << yn(f.fc_matlang) << "\n"
            << "qh-matlang: " << yn(f.qh_matlang) << "\n"
            << "simple-matlang: " << yn(f.simple_matlang) << "\n";
  return 0;
}

// ---- bench ----

struct BenchArgs {
  Common c;
  std::string query;
  std::string sizes = "1e3,1e4,1e5";
  int runs = 1;
  bool dynamic = false;
  std::size_t updates = 100000;
};

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double d = 0;
    try {
      d = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || d < 1 || d > 1e9) throw UserError("--sizes: bad size '" + item + "'");
    out.push_back(static_cast<std::size_t>(std::llround(d)));
  }
  if (out.empty()) throw UserError("--sizes: no sizes given");
  return out;
}

int run_bench(const BenchArgs& a) {
  auto s = builtin_semiring(a.c.semiring);
  auto q = a.query.empty() ? parse_query(a.dynamic ? kDefaultDynBenchQuery : kDefaultBenchQuery) : load_cq(a.query);
  auto sizes = parse_sizes(a.sizes);
  if (a.runs < 1) throw UserError("--runs must be positive");
  std::uint64_t seed = seed_from_env(1);
  std::vector<std::string> rels;
  for (const auto& at : q.atoms)
    if (std::find(rels.begin(), rels.end(), at.relation) == rels.end()) rels.push_back(at.relation);

  json runs = json::array();
  std::vector<double> xs, ys;
  std::optional<std::string> mismatch;
  for (std::size_t n : sizes) {
    std::vector<double> pre;
    for (int r = 0; r < a.runs; ++r) {
      Rng rng(seed + 7919 * n + static_cast<std::uint64_t>(r));
      auto db = scaled_database(rng, q, n, s);
      json run = {{"size", n}, {"run", r}, {"db_size", db_size(db)}};
      if (a.dynamic) {
        auto ups = balanced_updates(rng, db, a.updates, rels);
        auto b = bench_dynamic(q, db, ups);
        run["updates"] = b.updates;
        run["timing"] = {{"preprocess_seconds", b.preprocess_seconds},
                         {"mean_update_ns", b.mean_update_ns},
                         {"max_update_ns", b.max_update_ns}};
        pre.push_back(b.mean_update_ns);
      } else {
        auto b = bench_static(q, db);
        run["outputs"] = b.outputs;
        run["timing"] = {{"preprocess_seconds", b.preprocess_seconds},
                         {"enumerate_seconds", b.enumerate_seconds},
                         {"max_gap_ns", b.max_gap_ns},
                         {"gap_histogram_log2_ns", b.gap_histogram}};
        pre.push_back(b.preprocess_seconds);
        if (a.c.verify && n <= 2000 && !mismatch) {
          auto got = eval_materialized(q, db).sorted_entries();
          if (!same_entries(got, oracle_eval_cq(q, db).sorted_entries(), s))
            mismatch = "engine result differs from the oracle at size " + std::to_string(n);
        }
      }
      runs.push_back(run);
    }
    xs.push_back(static_cast<double>(n));
    ys.push_back(median(pre));
  }
  json summary = {{a.dynamic ? "median_mean_update_ns" : "median_preprocess_seconds", ys}};
  if (xs.size() >= 2) summary[a.dynamic ? "mean_update_loglog_slope" : "preprocess_loglog_slope"] = loglog_slope(xs, ys);
  json r = {{"command", "bench"},
            {"mode", a.dynamic ? "dynamic" : "static"},
            {"query", to_string(q)},
            {"semiring", s.name()},
            {"sizes", sizes},
            {"runs", runs},
            {"timing", summary}};
  if (a.c.verify) r["verified"] = !mismatch;
  emit(r);
  if (mismatch) throw VerificationFailed(*mismatch);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deltaenum: constant-delay enumeration and maintenance of semiring-annotated query answers"};
  app.require_subcommand(1);

  ClassifyArgs cl;
  auto* classify_cmd = app.add_subcommand("classify", "report structural properties of a query");
  classify_cmd->add_option("query,--query", cl.query, "query file (.cq)")->required()->check(CLI::ExistingFile);
  add_common(classify_cmd, cl.c);

  PlanArgs pl;
  auto* plan_cmd = app.add_subcommand("plan", "print the decomposition and plan as JSON or Graphviz");
  plan_cmd->add_option("query,--query", pl.query, "query file (.cq)")->required()->check(CLI::ExistingFile);
  plan_cmd->add_flag("--dot", pl.dot, "Graphviz output");
  plan_cmd->add_flag("--guarded", pl.guarded, "guarded plan of a q-hierarchical query");
  add_common(plan_cmd, pl.c);

  EvalArgs ev, en;
  auto add_eval = [&](const char* name, const char* help, EvalArgs& e) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("query,--query", e.query, "query file (.cq)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--db", e.db, "database directory with vocab.json and <R>.csv")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--vocab", e.vocab, "vocabulary file (default <db>/vocab.json)");
    cmd->add_option("--limit", e.limit, "stop after N outputs");
    cmd->add_option("--out", e.out, "csv | jsonl")->capture_default_str();
    add_common(cmd, e.c);
    return cmd;
  };
  auto* eval_cmd = add_eval("eval", "evaluate a query", ev);
  auto* enum_cmd = add_eval("enumerate", "stream the answers of a free-connex query", en);

  DynArgs dy;
  auto* dyn_cmd = app.add_subcommand("dyn", "maintain a q-hierarchical query under an update script");
  dyn_cmd->add_option("query,--query", dy.query, "query file (.cq)")->required()->check(CLI::ExistingFile);
  dyn_cmd->add_option("--db", dy.db, "initial database directory")->required()->check(CLI::ExistingDirectory);
  dyn_cmd->add_option("--vocab", dy.vocab, "vocabulary file (default <db>/vocab.json)");
  dyn_cmd->add_option("--updates", dy.updates, "update script (+ R 1 2 7 / - R 1 2)")
      ->required()
      ->check(CLI::ExistingFile);
  dyn_cmd->add_flag("--enumerate-after-each", dy.each, "print the answers after every update");
  dyn_cmd->add_option("--out", dy.out, "csv | jsonl")->capture_default_str();
  add_common(dyn_cmd, dy.c);

  MatlangArgs me, mc, mk;
  auto* matlang_cmd = app.add_subcommand("matlang", "matrix query language front end");
  matlang_cmd->require_subcommand(1);
  auto add_ml = [&](const char* name, const char* help, MatlangArgs& m) {
    auto* cmd = matlang_cmd->add_subcommand(name, help);
    cmd->add_option("expr,--expr", m.expr, "expression file (.ml)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--schema", m.schema, "schema file (default schema.json next to the expression)");
    add_common(cmd, m.c);
    return cmd;
  };
  auto* ml_eval = add_ml("eval", "evaluate an expression", me);
  ml_eval->add_option("--data", me.data, "directory with <A>.coo files (default: the expression's directory)")
      ->check(CLI::ExistingDirectory);
  auto* ml_compile = add_ml("compile", "translate to a conjunctive query", mc);
  ml_compile->add_flag("--dump-cq", mc.dump_cq, "print only the translated query");
  auto* ml_classify = add_ml("classify", "report fragment membership", mk);

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("bench", "scaling benchmark on synthetic databases (JSON)");
  bench_cmd->add_option("query,--query", be.query, "query file (default: a built-in query)")
      ->check(CLI::ExistingFile);
  bench_cmd->add_option("--sizes", be.sizes, "comma-separated tuple counts")->capture_default_str();
  bench_cmd->add_option("--runs", be.runs, "runs per size")->capture_default_str();
  bench_cmd->add_flag("--dynamic", be.dynamic, "time single-tuple updates instead of enumeration");
  bench_cmd->add_option("--updates", be.updates, "updates per dynamic run")->capture_default_str();
  add_common(bench_cmd, be.c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* where = &app;
    for (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().back(); sub;
         sub = sub->get_subcommands().empty() ? nullptr : sub->get_subcommands().back())
      where = sub;
    std::cerr << where->help();
    return 1;
  }

  try {
    if (classify_cmd->parsed()) return run_classify(cl);
    if (plan_cmd->parsed()) return run_plan(pl);
    if (eval_cmd->parsed()) return run_eval(ev, false);
    if (enum_cmd->parsed()) return run_eval(en, true);
    if (dyn_cmd->parsed()) return run_dyn(dy);
    if (ml_eval->parsed()) return run_matlang_eval(me);
    if (ml_compile->parsed()) return run_matlang_compile(mc);
    if (ml_classify->parsed()) return run_matlang_classify(mk);
    if (bench_cmd->parsed()) return run_bench(be);
  } catch (const VerificationFailed& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return 2;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
