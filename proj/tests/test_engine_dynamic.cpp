#include <doctest.h>

#include <set>

#include "deltaenum/engine_dynamic.hpp"
#include "deltaenum/errors.hpp"
#include "deltaenum/generators.hpp"
#include "deltaenum/oracle.hpp"

using namespace deltaenum;

namespace {

using Entries = std::vector<std::pair<Tuple, Value>>;

Value nat(std::uint64_t n) { return Value::natural(n); }

Database example_db(const Semiring& s) {
  Vocabulary v;
  v.relations = {{"A", 2}, {"U", 1}, {"Z", 1}};
  v.constants["1"] = 1;
  Database db(v, s);
  bool b = s.kind() == SemiringKind::Boolean;
  db.relation("A").set(Tuple{1, 2}, b ? s.one() : nat(2));
  db.relation("A").set(Tuple{1, 3}, b ? s.one() : nat(1));
  db.relation("U").set(Tuple{1}, b ? s.one() : nat(4));
  return db;
}

// the projection node above A's subtree: vars {x}, single child over {x,y}
int projection_node(const QueryPlan& p) {
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    const auto& n = p.nodes[i];
    if (n.is_leaf() || n.children.size() != 1 || n.vars.size() != 1) continue;
    if (p.nodes[n.children[0]].vars.size() == 2) return static_cast<int>(i);
  }
  return -1;
}

Entries drain(Enumerator e) {
  Entries out;
  while (e.next()) out.emplace_back(e.tuple(), e.annotation());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

bool same(const Entries& a, const Entries& b, const Semiring& s, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].first != b[i].first || !s.approx_equal(a[i].second, b[i].second, tol)) return false;
  return true;
}

}  // namespace

TEST_CASE("maintenance example") {
  auto n = builtin_semiring("natural");
  auto q = parse_query("H(x) :- A(x,y), U(x).");
  auto st = dyn_preprocess(q, example_db(n));
  CHECK(st.check().empty());
  int proj = projection_node(st.plan());
  REQUIRE(proj >= 0);
  CHECK(st.accumulator_totals(proj) == Entries{{{1}, nat(3)}});
  CHECK(drain(dyn_enumerate(st)) == Entries{{{1}, nat(12)}});
  CHECK(state_node_entries(st.state(), st.plan().root) == Entries{{{1}, nat(12)}});

  dyn_update(st, SingleTupleUpdate::insert("A", {1, 5}, nat(1)));
  CHECK(st.check().empty());
  CHECK(st.accumulator_totals(proj) == Entries{{{1}, nat(4)}});
  CHECK(drain(dyn_enumerate(st)) == Entries{{{1}, nat(16)}});

  auto before = state_node_sizes(st.state());
  dyn_update(st, SingleTupleUpdate::insert("Z", {7}, nat(3)));
  CHECK(st.database().relation("Z").size() == 1);
  CHECK(drain(dyn_enumerate(st)) == Entries{{{1}, nat(16)}});
  CHECK(state_node_sizes(st.state()) == before);

  dyn_update(st, SingleTupleUpdate::erase("U", {1}));
  CHECK(st.check().empty());
  CHECK(drain(dyn_enumerate(st)).empty());
  CHECK(st.accumulator_totals(proj) == Entries{{{1}, nat(4)}});
}

TEST_CASE("empty database and boolean variant") {
  auto n = builtin_semiring("natural");
  Vocabulary v;
  v.relations = {{"A", 2}, {"U", 1}};
  v.constants["1"] = 1;
  auto q = parse_query("H(x) :- A(x,y), U(x).");
  auto st = dyn_preprocess(q, Database(v, n));
  CHECK(st.accumulator_count() == 0);
  CHECK(drain(dyn_enumerate(st)).empty());

  auto b = builtin_semiring("boolean");
  auto bs = dyn_preprocess(q, example_db(b));
  CHECK(drain(dyn_enumerate(bs)) == Entries{{{1}, b.one()}});

  // deletion removes the tuple whatever its multiplicity
  Vocabulary w;
  w.relations = {{"R", 1}};
  w.constants["1"] = 1;
  auto rs = dyn_preprocess(parse_query("H(x) :- R(x)."), Database(w, b));
  for (int i = 0; i < 3; ++i) dyn_update(rs, SingleTupleUpdate::insert("R", {2}, b.one()));
  CHECK(drain(dyn_enumerate(rs)) == Entries{{{2}, b.one()}});
  dyn_update(rs, SingleTupleUpdate::erase("R", {2}));
  CHECK(drain(dyn_enumerate(rs)).empty());
}

TEST_CASE("rejections") {
  auto n = builtin_semiring("natural");
  auto db = example_db(n);
  CHECK_THROWS_AS(dyn_preprocess(parse_query("H(x) :- A(x,y), U(y)."), db), ClassificationError);
  CHECK_THROWS_AS(dyn_preprocess(parse_query("H(x) :- A(x,y), U(x)."), example_db(builtin_semiring("tropical-min"))),
                  CapabilityError);
}

TEST_CASE("inserts then deletes restore the output") {
  auto n = builtin_semiring("natural");
  auto q = parse_query("H(x) :- A(x,y), U(x).");
  auto st = dyn_preprocess(q, example_db(n));
  auto initial = drain(dyn_enumerate(st));
  std::vector<Tuple> added{{2, 1}, {2, 2}, {3, 3}, {1, 4}};
  for (const auto& t : added) dyn_update(st, SingleTupleUpdate::insert("A", t, nat(2)));
  dyn_update(st, SingleTupleUpdate::insert("U", {2}, nat(1)));
  for (const auto& t : added) dyn_update(st, SingleTupleUpdate::erase("A", t));
  dyn_update(st, SingleTupleUpdate::erase("U", {2}));
  CHECK(st.check().empty());
  CHECK(drain(dyn_enumerate(st)) == initial);
}

TEST_CASE("random update streams agree with recomputation") {
  Rng rng(4242);
  QueryGenOptions o;
  for (const char* sname : {"boolean", "natural", "real"}) {
    auto s = builtin_semiring(sname);
    for (int i = 0; i < 25; ++i) {
      auto v = random_vocabulary(rng, o, 4);
      auto q = random_q_hierarchical_cq(rng, v, o);
      auto db = random_database(rng, v, s, {4, 12});
      auto st = dyn_preprocess(q, db);
      for (const auto& u : random_updates(rng, db, 200, 4)) {
        dyn_update(st, u);
        auto bad = st.check();
        REQUIRE_MESSAGE(bad.empty(), to_string(q), " ", bad.empty() ? "" : bad[0]);
        auto got = drain(dyn_enumerate(st));
        auto fresh = drain(Enumerator(preprocess(q, st.database())));
        REQUIRE_MESSAGE(same(got, fresh, s, 1e-6), sname, " ", to_string(q));
        REQUIRE(same(got, oracle_eval_cq(q, st.database(), 4).sorted_entries(), s, 1e-6));
      }
    }
  }
}

TEST_CASE("long stream on a small instance") {
  Rng rng(99);
  auto s = builtin_semiring("real");
  QueryGenOptions o;
  auto v = random_vocabulary(rng, o, 3);
  auto q = random_q_hierarchical_cq(rng, v, o);
  while (q.atoms.size() < 2) q = random_q_hierarchical_cq(rng, v, o);
  auto db = random_database(rng, v, s, {3, 10});
  auto st = dyn_preprocess(q, db);
  std::size_t checked = 0;
  for (const auto& u : random_updates(rng, db, 10000, 3)) {
    dyn_update(st, u);
    REQUIRE(st.check().empty());
    auto got = drain(dyn_enumerate(st));
    REQUIRE_MESSAGE(same(got, oracle_eval_cq(q, st.database(), 3).sorted_entries(), s, 1e-6), to_string(q));
    ++checked;
  }
  CHECK(checked == 10000);
}
