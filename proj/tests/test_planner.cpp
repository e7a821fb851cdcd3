#include <doctest.h>

#include <algorithm>
#include <set>

#include "deltaenum/generators.hpp"
#include "deltaenum/planner.hpp"

using namespace deltaenum;

namespace {

std::set<std::string> names(const QueryPlan& p, const std::vector<int>& ids) {
  std::set<std::string> out;
  for (int i : ids) out.insert(p.var_names[i]);
  return out;
}

std::size_t connex_count(const QueryPlan& p) {
  return std::count_if(p.nodes.begin(), p.nodes.end(), [](const PlanNode& n) { return n.connex; });
}

bool has_edge(const JoinTree& t, int a, int b) {
  return std::any_of(t.edges.begin(), t.edges.end(), [&](auto e) {
    return (e.first == a && e.second == b) || (e.first == b && e.second == a);
  });
}

}  // namespace

TEST_CASE("join trees") {
  auto path = build_join_tree(parse_query("H(x,y) :- R(x,z), S(z,y).").atoms);
  REQUIRE(path);
  CHECK(path->edges.size() == 1);
  CHECK(has_edge(*path, 0, 1));

  CHECK_FALSE(build_join_tree(parse_query("H() :- R(x,y), S(y,z), T(z,x).").atoms));

  auto star = parse_query("H(x,y) :- A(x,y), U(x), V(y).");
  auto t = build_join_tree(star.atoms);
  REQUIRE(t);
  CHECK(has_edge(*t, 0, 1));
  CHECK(has_edge(*t, 0, 2));
  std::vector<std::vector<std::string>> edges;
  for (const auto& a : star.atoms) edges.push_back(a.vars);
  CHECK(is_join_tree(*t, edges));
}

TEST_CASE("named classification examples") {
  auto c1 = classify(parse_query("H(x,y) :- A(x,z), B(z,y)."));
  CHECK(c1.acyclic);
  CHECK_FALSE(c1.free_connex);

  auto c2 = classify(parse_query("H(x) :- A(x,y), U(x)."));
  CHECK(c2.q_hierarchical);
  CHECK(c2.free_connex);

  auto c3 = classify(parse_query("H(x) :- A(x,y), U(y)."));
  CHECK(c3.free_connex);
  CHECK_FALSE(c3.q_hierarchical);

  auto c4 = classify(parse_query("H(x,y) :- A(x,y), U(x), V(y)."));
  CHECK(c4.free_connex);
  CHECK_FALSE(c4.q_hierarchical);

  auto tri = classify(parse_query("H() :- R(x,y), S(y,z), T(z,x)."));
  CHECK_FALSE(tri.acyclic);
  CHECK_FALSE(tri.free_connex);

  auto sj = classify(parse_query("H(x,y) :- R(x,z), R(z,y), z <= c."));
  CHECK_FALSE(sj.self_join_free);
}

TEST_CASE("free-connex GHDs") {
  auto q = parse_query("H(x) :- A(x,y), U(y).");
  auto h = build_fc_ghd(q);
  REQUIRE(h);
  CHECK(check_ghd(*h, q).empty());
  CHECK(h->connex_size() <= 1);
  for (const auto& n : h->nodes)
    if (n.connex)
      for (const auto& v : n.bag) CHECK(v == "x");

  auto single = parse_query("H(x,y) :- R(x,y).");
  auto hs = build_fc_ghd(single);
  REQUIRE(hs);
  CHECK(hs->nodes.size() <= 2);
  CHECK(hs->connex_size() == 1);
  CHECK(hs->nodes[hs->root].bag == std::vector<std::string>{"x", "y"});

  CHECK_FALSE(build_fc_ghd(parse_query("H(x,y) :- R(x,z), S(z,y).")));
}

TEST_CASE("free-connex plans") {
  auto single = parse_query("H(x,y) :- R(x,y).");
  auto p = build_fc_plan(single);
  REQUIRE(p);
  CHECK(check_plan(*p, single).empty());
  const auto& root = p->nodes[p->root];
  CHECK(names(*p, root.vars) == std::set<std::string>{"x", "y"});
  REQUIRE(root.children.size() == 1);
  CHECK(p->nodes[root.children[0]].is_leaf());
  CHECK(connex_count(*p) == 1);

  auto q = parse_query("H(x) :- A(x,y), U(y).");
  auto pq = build_fc_plan(q);
  REQUIRE(pq);
  CHECK(check_plan(*pq, q).empty());
  CHECK(names(*pq, pq->nodes[pq->root].vars) == std::set<std::string>{"x"});
  CHECK(connex_count(*pq) == 1);
  CHECK(pq->frontier() == std::vector<int>{pq->root});
  // the A leaf sits below a node over {x,y}
  bool found = false;
  for (const auto& n : pq->nodes)
    if (n.is_leaf() && pq->atoms[n.atom].relation == "A" && !n.filter)
      found = names(*pq, pq->nodes[n.parent].vars) == std::set<std::string>{"x", "y"};
  CHECK(found);

  CHECK_FALSE(build_fc_plan(parse_query("H(x,y) :- R(x,z), S(z,y).")));
}

TEST_CASE("two-child nodes are normalized") {
  // the root joins branches over {x,y} and {y,z}; both must be cut down to subsets of the parent
  auto q = parse_query("H(y) :- R(x,y), S(y,z), T(y).");
  auto p = build_fc_plan(q);
  REQUIRE(p);
  CHECK(check_plan(*p, q).empty());
  for (const auto& n : p->nodes) {
    if (n.children.size() != 2) continue;
    for (int c : n.children)
      CHECK(std::includes(n.vars.begin(), n.vars.end(), p->nodes[c].vars.begin(), p->nodes[c].vars.end()));
    CHECK(p->nodes[n.children[0]].vars == n.vars);
  }
}

TEST_CASE("guarded plans") {
  auto q = parse_query("H(x) :- A(x,y), U(x).");
  auto p = build_guarded_plan(q);
  REQUIRE(p);
  CHECK(p->guarded);
  CHECK(check_plan(*p, q).empty());
  const auto& root = p->nodes[p->root];
  CHECK(names(*p, root.vars) == std::set<std::string>{"x"});
  REQUIRE(root.children.size() == 2);
  std::multiset<std::string> below;
  for (int c : root.children) {
    const auto& n = p->nodes[c];
    CHECK(names(*p, n.vars) == std::set<std::string>{"x"});
    CHECK(n.connex);
    REQUIRE(n.children.size() == 1);
    const auto& g = p->nodes[n.children[0]];
    if (g.is_leaf()) {
      below.insert("leaf " + p->atoms[g.atom].relation);
    } else {
      CHECK(names(*p, g.vars) == std::set<std::string>{"x", "y"});
      REQUIRE(g.children.size() == 1);
      below.insert("via xy " + p->atoms[p->nodes[g.children[0]].atom].relation);
    }
  }
  CHECK(below == std::multiset<std::string>{"leaf U", "via xy A"});

  CHECK_FALSE(build_guarded_plan(parse_query("H(x) :- A(x,y), U(y).")));

  auto full = parse_query("H(x,y) :- R(x,y).");
  auto pf = build_guarded_plan(full);
  REQUIRE(pf);
  CHECK(check_plan(*pf, full).empty());
}

TEST_CASE("random corpus: classification agrees with constructions") {
  Rng rng(101);
  QueryGenOptions o;
  o.max_atoms = 5;
  auto v = random_vocabulary(rng, o, 5);
  int fc = 0, qh = 0;
  for (int i = 0; i < 1000; ++i) {
    auto q = i % 2 ? random_cq(rng, v, o) : random_q_hierarchical_cq(rng, v, o);
    auto c = classify(q);
    auto h = build_fc_ghd(q);
    auto g = build_guarded_plan(q);
    CHECK_MESSAGE(c.free_connex == h.has_value(), to_string(q));
    CHECK_MESSAGE(c.q_hierarchical == g.has_value(), to_string(q));
    if (c.q_hierarchical) CHECK_MESSAGE(c.free_connex, to_string(q));
    if (h) {
      ++fc;
      CHECK_MESSAGE(check_ghd(*h, q).empty(), to_string(q));
      std::size_t free = split(q).rel_part.free_vars().size();
      CHECK(h->connex_size() <= std::max<std::size_t>(1, free));
      CHECK(h->nodes.size() <= 2 * q.atoms.size());
      auto p = build_fc_plan(q);
      REQUIRE(p);
      auto bad = check_plan(*p, q);
      CHECK_MESSAGE(bad.empty(), to_string(q), " ", bad.empty() ? "" : bad[0]);
    }
    if (g) {
      ++qh;
      auto bad = check_plan(*g, q);
      CHECK_MESSAGE(bad.empty(), to_string(q), " ", bad.empty() ? "" : bad[0]);
    }
  }
  CHECK(fc > 300);
  CHECK(qh > 300);
}

TEST_CASE("plan dumps") {
  auto q = parse_query("H(x) :- A(x,y), U(y).");
  auto p = build_fc_plan(q);
  REQUIRE(p);
  auto j = plan_to_json(*p);
  CHECK(j.contains("nodes"));
  CHECK(j["nodes"].size() == p->nodes.size());
  CHECK(plan_to_dot(*p).find("digraph") != std::string::npos);
  CHECK(plan_to_json(*p).dump() == j.dump());
}
