#include "deltaenum/generators.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "deltaenum/errors.hpp"
#include "deltaenum/planner.hpp"

namespace deltaenum {

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* s = std::getenv("DELTA_ENUM_SEED");
  if (!s || !*s) return fallback;
  char* end = nullptr;
  unsigned long long v = std::strtoull(s, &end, 10);
  if (*end) throw ConfigError(std::string("DELTA_ENUM_SEED is not an integer: ") + s);
  return v;
}

namespace {

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[uniform(rng, 0, v.size() - 1)];
}

std::vector<std::string> relation_names(const Vocabulary& v) {
  std::vector<std::string> out;
  for (const auto& [n, a] : v.relations) out.push_back(n);
  return out;
}

std::vector<std::string> constant_names(const Vocabulary& v) {
  std::vector<std::string> out;
  for (const auto& [n, a] : v.constants) out.push_back(n);
  return out;
}

/** Adds inequalities: covered ones on body variables, uncovered ones on fresh variables. */
void add_ineqs(Rng& rng, ConjunctiveQuery& q, const Vocabulary& v, const QueryGenOptions& o,
               std::vector<std::string> body_vars, std::size_t next_var) {
  auto consts = constant_names(v);
  std::size_t n = 0;
  while (coin(rng, o.ineq_prob) && n < 3) {
    ++n;
    bool uncovered = next_var <= o.max_vars && (body_vars.empty() || coin(rng, 0.35));
    std::string var;
    if (uncovered) {
      var = "x" + std::to_string(next_var++);
      if (coin(rng, 0.5)) q.head_vars.push_back(var);
      body_vars.push_back(var);
    } else {
      var = pick(rng, body_vars);
    }
    q.ineqs.push_back({var, pick(rng, consts)});
  }
}

}  // namespace

Vocabulary random_vocabulary(Rng& rng, const QueryGenOptions& o, Datum domain) {
  Vocabulary v;
  for (std::size_t i = 1; i <= o.relations; ++i) v.relations["R" + std::to_string(i)] = uniform(rng, 1, o.max_arity);
  v.constants["1"] = 1;
  for (std::size_t i = 1; i <= o.constants; ++i) v.constants["c" + std::to_string(i)] = uniform(rng, 1, domain);
  return v;
}

ConjunctiveQuery random_cq(Rng& rng, const Vocabulary& v, const QueryGenOptions& o) {
  auto rels = relation_names(v);
  ConjunctiveQuery q;
  std::size_t atoms = uniform(rng, 1, o.max_atoms);
  std::size_t pool = uniform(rng, 1, std::max<std::size_t>(1, o.max_vars - 1));
  std::set<std::string> used;
  for (std::size_t a = 0; a < atoms; ++a) {
    RelAtom at;
    at.relation = pick(rng, rels);
    for (std::size_t j = 0; j < v.relations.at(at.relation); ++j) {
      at.vars.push_back("x" + std::to_string(uniform(rng, 1, pool)));
      used.insert(at.vars.back());
    }
    q.atoms.push_back(at);
  }
  std::vector<std::string> body(used.begin(), used.end());
  for (const auto& x : body)
    if (coin(rng, 0.5)) q.head_vars.push_back(x);
  std::shuffle(q.head_vars.begin(), q.head_vars.end(), rng);
  if (!q.head_vars.empty() && coin(rng, 0.1)) q.head_vars.push_back(q.head_vars.front());
  add_ineqs(rng, q, v, o, body, pool + 1);
  q.normalize_bound();
  return q;
}

ConjunctiveQuery random_free_connex_cq(Rng& rng, const Vocabulary& v, const QueryGenOptions& o) {
  for (int tries = 0; tries < 10000; ++tries) {
    ConjunctiveQuery q = random_cq(rng, v, o);
    if (is_free_connex(q)) return q;
  }
  throw InternalError("no free-connex query found");
}

ConjunctiveQuery random_q_hierarchical_cq(Rng& rng, const Vocabulary& v, const QueryGenOptions& o) {
  auto rels = relation_names(v);
  for (int tries = 0; tries < 10000; ++tries) {
    // random forest over x1..xn: parent[i] < i or none
    std::size_t n = uniform(rng, 1, std::max<std::size_t>(1, o.max_vars - 1));
    std::vector<int> parent(n + 1, 0);
    for (std::size_t i = 2; i <= n; ++i) parent[i] = coin(rng, 0.3) ? 0 : static_cast<int>(uniform(rng, 1, i - 1));
    auto path = [&](int x) {
      std::vector<std::string> p;
      for (; x; x = parent[x]) p.push_back("x" + std::to_string(x));
      return p;
    };
    // free variables are upward closed
    std::vector<bool> free(n + 1, false);
    for (std::size_t i = 1; i <= n; ++i) free[i] = (parent[i] == 0 || free[parent[i]]) && coin(rng, 0.6);
    ConjunctiveQuery q;
    std::size_t atoms = uniform(rng, 1, o.max_atoms);
    bool ok = true;
    for (std::size_t a = 0; a < atoms && ok; ++a) {
      auto vars = path(static_cast<int>(uniform(rng, 1, n)));
      std::vector<std::string> fits;
      for (const auto& r : rels)
        if (v.relations.at(r) >= vars.size()) fits.push_back(r);
      if (fits.empty()) {
        ok = false;
        break;
      }
      RelAtom at{pick(rng, fits), {}};
      // pad with repeated variables up to the arity
      at.vars = vars;
      while (at.vars.size() < v.relations.at(at.relation)) at.vars.push_back(pick(rng, vars));
      std::shuffle(at.vars.begin(), at.vars.end(), rng);
      q.atoms.push_back(at);
    }
    if (!ok) continue;
    std::set<std::string> used;
    for (const auto& a : q.atoms) used.insert(a.vars.begin(), a.vars.end());
    for (std::size_t i = 1; i <= n; ++i)
      if (free[i] && used.count("x" + std::to_string(i))) q.head_vars.push_back("x" + std::to_string(i));
    std::shuffle(q.head_vars.begin(), q.head_vars.end(), rng);
    add_ineqs(rng, q, v, o, std::vector<std::string>(used.begin(), used.end()), n + 1);
    q.normalize_bound();
    if (is_q_hierarchical(q)) return q;
  }
  throw InternalError("no q-hierarchical query found");
}

Value random_value(Rng& rng, const Semiring& s) {
  switch (s.kind()) {
    case SemiringKind::Boolean: return Value::boolean(true);
    case SemiringKind::Natural: return Value::natural(uniform(rng, 1, 5));
    case SemiringKind::Real: {
      int k = static_cast<int>(uniform(rng, 1, 8));
      return Value::real((coin(rng, 0.3) ? -k : k) / 4.0);
    }
    case SemiringKind::TropicalMin: return Value::real(static_cast<double>(uniform(rng, 0, 9)));
  }
  return s.one();
}

Database random_database(Rng& rng, const Vocabulary& v, const Semiring& s, const DbGenOptions& o) {
  Database db(v, s);
  for (const auto& [name, arity] : v.relations) {
    AnnotatedRelation& rel = db.relation(name);
    std::size_t n = uniform(rng, 0, o.max_tuples);
    for (std::size_t i = 0; i < n; ++i) {
      Tuple t(arity);
      for (auto& d : t) d = uniform(rng, 1, o.domain);
      rel.set(t, random_value(rng, s));
    }
  }
  return db;
}

std::vector<SingleTupleUpdate> random_updates(Rng& rng, const Database& db, std::size_t count, Datum domain,
                                              const std::vector<std::string>& relations) {
  std::vector<std::string> rels = relations;
  if (rels.empty())
    for (const auto& [n, r] : db.relations()) rels.push_back(n);
  Database shadow = db;
  const Semiring& s = db.semiring();
  std::vector<SingleTupleUpdate> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string& r = pick(rng, rels);
    AnnotatedRelation& rel = shadow.relation(r);
    SingleTupleUpdate u;
    if (!rel.empty() && coin(rng, 0.4)) {
      auto id = rel.table().live()[uniform(rng, 0, rel.size() - 1)];
      auto t = rel.table().tuple(id);
      Tuple tup(t.begin(), t.end());
      u = coin(rng, 0.7) ? SingleTupleUpdate::erase(r, tup) : SingleTupleUpdate::insert(r, tup, random_value(rng, s));
    } else {
      Tuple t(rel.arity());
      for (auto& d : t) d = uniform(rng, 1, domain);
      u = SingleTupleUpdate::insert(r, t, random_value(rng, s));
    }
    apply_update(shadow, u);
    out.push_back(u);
  }
  return out;
}

// ---------------------------------------------------------------------------

MatrixSchema random_matrix_schema(Rng& rng, Datum max_dim, bool unary_vectors) {
  MatrixSchema s;
  s.sizes["1"] = 1;
  for (const char* n : {"alpha", "beta", "gamma"}) s.sizes[n] = uniform(rng, 1, max_dim);
  auto decl = [&](const std::string& name, std::string r, std::string c) {
    MatrixDecl d{{r, c}, Encoding::Binary};
    if (r == "1" && c == "1")
      d.encoding = unary_vectors ? Encoding::Nullary : Encoding::Binary;
    else if ((r == "1" || c == "1") && unary_vectors)
      d.encoding = Encoding::Unary;
    s.matrices[name] = d;
  };
  decl("A", "alpha", "beta");
  decl("B", "beta", "gamma");
  decl("C", "alpha", "alpha");
  decl("D", "alpha", "beta");
  decl("U", "alpha", "1");
  decl("V", "beta", "1");
  decl("W", "1", "gamma");
  decl("s", "1", "1");
  return s;
}

namespace {

class ExprGen {
 public:
  ExprGen(Rng& rng, const MatrixSchema& s) : rng_(rng), s_(s) {
    for (const auto& [n, v] : s.sizes) sizes_.push_back(n);
  }

  ExprPtr gen(const MatType& t, int depth) {
    std::vector<ExprPtr> leaves;
    for (const auto& [n, d] : s_.matrices)
      if (d.type == t) leaves.push_back(Expr::symbol(n));
    for (const auto& [n, size] : vecs_)
      if (t.rows == size && t.cols == "1") leaves.push_back(Expr::symbol(n));
    if (t.cols == "1") leaves.push_back(Expr::ones(t.rows));
    if (t.rows == t.cols && t.rows != "1") leaves.push_back(Expr::eye(t.rows));
    if (depth <= 0 || coin(rng_, 0.25)) {
      if (!leaves.empty()) return pick(rng_, leaves);
      return Expr::product(gen({t.rows, "1"}, 0), Expr::transpose(gen({t.cols, "1"}, 0)));
    }
    switch (uniform(rng_, 0, 5)) {
      case 0: return Expr::transpose(gen({t.cols, t.rows}, depth - 1));
      case 1: {
        std::string k = pick(rng_, sizes_);
        return Expr::product(gen({t.rows, k}, depth - 1), gen({k, t.cols}, depth - 1));
      }
      case 2: return Expr::hadamard(gen(t, depth - 1), gen(t, depth - 1));
      case 3: return Expr::scalar_mul(gen({"1", "1"}, depth - 1), gen(t, depth - 1));
      case 4: {
        std::string v = "v" + std::to_string(++counter_);
        std::string k = pick(rng_, sizes_);
        vecs_.emplace_back(v, k);
        ExprPtr body = gen(t, depth - 1);
        vecs_.pop_back();
        return Expr::sum(v, k, body);
      }
      default:
        if (!leaves.empty()) return pick(rng_, leaves);
        return gen(t, depth - 1);
    }
  }

  MatType random_type() { return {pick(rng_, sizes_), pick(rng_, sizes_)}; }

 private:
  Rng& rng_;
  const MatrixSchema& s_;
  std::vector<std::string> sizes_;
  std::vector<std::pair<std::string, std::string>> vecs_;
  int counter_ = 0;
};

}  // namespace

ExprPtr random_conj_matlang(Rng& rng, const MatrixSchema& schema, int depth) {
  ExprGen g(rng, schema);
  return g.gen(g.random_type(), depth);
}

MatrixInstance random_matrix_instance(Rng& rng, const MatrixSchema& schema, const Semiring& s, double density) {
  MatrixInstance inst = empty_instance(schema, s);
  for (auto& [name, m] : inst.matrices)
    for (Datum i = 1; i <= m.rows; ++i)
      for (Datum j = 1; j <= m.cols; ++j)
        if (coin(rng, density)) m.entries[{i, j}] = random_value(rng, s);
  return inst;
}

}  // namespace deltaenum
