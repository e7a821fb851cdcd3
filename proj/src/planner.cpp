#include "deltaenum/planner.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "deltaenum/errors.hpp"

namespace deltaenum {

namespace {

using VarSet = std::set<std::string>;

VarSet to_set(const std::vector<std::string>& v) { return VarSet(v.begin(), v.end()); }

bool subset(const VarSet& a, const VarSet& b) { return std::includes(b.begin(), b.end(), a.begin(), a.end()); }

std::vector<std::vector<std::string>> atom_edges(const std::vector<RelAtom>& atoms) {
  std::vector<std::vector<std::string>> out;
  for (const auto& a : atoms) out.push_back(a.vars);
  return out;
}

/** Free variables of q that occur in some relational atom, head order. */
std::vector<std::string> rel_free_vars(const ConjunctiveQuery& q) {
  VarSet in_atoms;
  for (const auto& a : q.atoms) in_atoms.insert(a.vars.begin(), a.vars.end());
  std::vector<std::string> out;
  for (const auto& v : q.free_vars())
    if (in_atoms.count(v)) out.push_back(v);
  return out;
}

}  // namespace

std::optional<JoinTree> build_join_tree(const std::vector<std::vector<std::string>>& hyperedges) {
  std::size_t m = hyperedges.size();
  JoinTree t;
  t.size = m;
  if (m == 0) return t;
  std::vector<VarSet> cur;
  for (const auto& e : hyperedges) cur.push_back(to_set(e));
  std::vector<bool> active(m, true);
  std::size_t remaining = m;
  while (remaining > 1) {
    // drop variables that only one remaining edge mentions
    std::map<std::string, int> count;
    for (std::size_t i = 0; i < m; ++i)
      if (active[i])
        for (const auto& v : cur[i]) ++count[v];
    for (std::size_t i = 0; i < m; ++i)
      if (active[i])
        for (auto it = cur[i].begin(); it != cur[i].end();)
          it = count[*it] == 1 ? cur[i].erase(it) : std::next(it);
    bool removed = false;
    for (std::size_t i = 0; i < m && !removed; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == i || !active[j] || !subset(cur[i], cur[j])) continue;
        t.edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
        active[i] = false;
        --remaining;
        removed = true;
        break;
      }
    }
    if (!removed) return std::nullopt;
  }
  return t;
}

std::optional<JoinTree> build_join_tree(const std::vector<RelAtom>& atoms) {
  return build_join_tree(atom_edges(atoms));
}

bool is_join_tree(const JoinTree& t, const std::vector<std::vector<std::string>>& hyperedges) {
  std::size_t m = hyperedges.size();
  if (t.size != m || (m > 0 && t.edges.size() != m - 1)) return false;
  std::vector<std::vector<int>> adj(m);
  for (auto [a, b] : t.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  // connected as a tree
  if (m > 0) {
    std::vector<bool> seen(m, false);
    std::vector<int> stack{0};
    seen[0] = true;
    std::size_t n = 0;
    while (!stack.empty()) {
      int x = stack.back();
      stack.pop_back();
      ++n;
      for (int y : adj[x])
        if (!seen[y]) {
          seen[y] = true;
          stack.push_back(y);
        }
    }
    if (n != m) return false;
  }
  VarSet all;
  for (const auto& e : hyperedges) all.insert(e.begin(), e.end());
  for (const auto& v : all) {
    std::vector<bool> has(m);
    std::size_t total = 0;
    for (std::size_t i = 0; i < m; ++i) {
      has[i] = std::find(hyperedges[i].begin(), hyperedges[i].end(), v) != hyperedges[i].end();
      total += has[i];
    }
    std::size_t inner_edges = 0;
    for (auto [a, b] : t.edges) inner_edges += has[a] && has[b];
    if (inner_edges + 1 != total) return false;  // forest with one component
  }
  return true;
}

bool is_acyclic(const ConjunctiveQuery& q) {
  auto edges = atom_edges(q.atoms);
  for (const auto& c : q.ineqs) edges.push_back({c.var});
  return build_join_tree(edges).has_value();
}

bool is_free_connex(const ConjunctiveQuery& q) {
  auto edges = atom_edges(q.atoms);
  if (!build_join_tree(edges)) return false;
  edges.push_back(rel_free_vars(q));
  return build_join_tree(edges).has_value();
}

bool is_q_hierarchical(const ConjunctiveQuery& q) {
  std::map<std::string, std::set<std::size_t>> occ;
  for (std::size_t i = 0; i < q.atoms.size(); ++i)
    for (const auto& v : q.atoms[i].vars) occ[v].insert(i);
  for (const auto& [x, ax] : occ) {
    for (const auto& [y, ay] : occ) {
      if (x == y) continue;
      bool x_in_y = std::includes(ay.begin(), ay.end(), ax.begin(), ax.end());
      bool y_in_x = std::includes(ax.begin(), ax.end(), ay.begin(), ay.end());
      bool disjoint = std::none_of(ax.begin(), ax.end(), [&](std::size_t a) { return ay.count(a) != 0; });
      if (!x_in_y && !y_in_x && !disjoint) return false;
      if (q.is_free(x) && x_in_y && !y_in_x && !q.is_free(y)) return false;
    }
  }
  return true;
}

Classification classify(const ConjunctiveQuery& q) {
  Classification c;
  c.acyclic = is_acyclic(q);
  c.free_connex = is_free_connex(q);
  c.q_hierarchical = is_q_hierarchical(q);
  auto cd = is_constant_disjoint(q);
  c.constant_disjoint = cd.ok;
  c.constant_disjoint_reason = cd.reason;
  c.self_join_free = !has_self_join(q);
  return c;
}

// ---------------------------------------------------------------------------
// GHD

std::size_t Ghd::connex_size() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.connex; }));
}

std::optional<Ghd> build_fc_ghd(const ConjunctiveQuery& q) {
  const auto& atoms = q.atoms;
  std::size_t m = atoms.size();
  Ghd h;
  if (m == 0) return h;
  auto edges = atom_edges(atoms);
  auto t = build_join_tree(edges);
  if (!t) return std::nullopt;
  std::vector<std::string> free = rel_free_vars(q);
  VarSet free_set = to_set(free);
  edges.push_back(free);
  auto t2 = build_join_tree(edges);
  if (!t2) return std::nullopt;

  // nodes 0..m-1: copies restricted to free variables (the connex part); m..2m-1: atoms
  std::size_t n = 2 * m;
  std::vector<VarSet> bag(n);
  std::vector<int> cover(n);
  std::vector<std::vector<int>> adj(n);
  for (std::size_t i = 0; i < m; ++i) {
    VarSet av = to_set(atoms[i].vars);
    bag[m + i] = av;
    for (const auto& v : av)
      if (free_set.count(v)) bag[i].insert(v);
    cover[i] = cover[m + i] = static_cast<int>(i);
  }
  auto link = [&](int a, int b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (auto [a, b] : t->edges) link(a, b);
  int head = static_cast<int>(m);
  for (auto [a, b] : t2->edges) {
    if (a == head) link(b, static_cast<int>(m) + b);
    else if (b == head) link(a, static_cast<int>(m) + a);
    else link(static_cast<int>(m) + a, static_cast<int>(m) + b);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  int root = 0;
  for (std::size_t i = 0; i < m; ++i)
    if (!bag[i].empty()) {
      root = static_cast<int>(i);
      break;
    }

  // orient from the root
  std::vector<int> parent(n, -2), order;
  std::deque<int> queue{root};
  parent[root] = -1;
  while (!queue.empty()) {
    int x = queue.front();
    queue.pop_front();
    order.push_back(x);
    for (int y : adj[x])
      if (parent[y] == -2) {
        parent[y] = x;
        queue.push_back(y);
      }
  }
  if (order.size() != n) throw InternalError("GHD construction produced a disconnected graph");

  // contract connex edges whose child bag is contained in the parent bag
  std::vector<int> rep(n);
  for (std::size_t i = 0; i < n; ++i) rep[i] = static_cast<int>(i);
  std::vector<bool> alive(n, true);
  auto in_u = [&](int x) { return x < static_cast<int>(m); };
  for (int c : order) {
    if (parent[c] < 0) continue;
    int p = rep[parent[c]];
    if (in_u(c) && in_u(p) && subset(bag[c], bag[p])) {
      rep[c] = p;
      alive[c] = false;
    }
  }

  std::vector<int> index(n, -1);
  for (int x : order)
    if (alive[x]) {
      index[x] = static_cast<int>(h.nodes.size());
      Ghd::Node node;
      node.bag.assign(bag[x].begin(), bag[x].end());
      node.cover = cover[x];
      node.connex = in_u(x);
      h.nodes.push_back(std::move(node));
    }
  for (int x : order) {
    if (!alive[x] || parent[x] < 0) continue;
    int p = index[rep[parent[x]]];
    h.nodes[index[x]].parent = p;
    h.nodes[p].children.push_back(index[x]);
  }
  h.root = index[root];
  return h;
}

std::vector<std::string> check_ghd(const Ghd& h, const ConjunctiveQuery& q) {
  std::vector<std::string> bad;
  const auto& atoms = q.atoms;
  if (atoms.empty()) {
    if (!h.nodes.empty()) bad.push_back("GHD of a query without atoms must be empty");
    return bad;
  }
  if (h.root < 0 || h.root >= static_cast<int>(h.nodes.size())) {
    bad.push_back("missing root");
    return bad;
  }
  VarSet free_set;
  for (const auto& v : rel_free_vars(q)) free_set.insert(v);
  for (std::size_t i = 0; i < h.nodes.size(); ++i) {
    const auto& nd = h.nodes[i];
    if (nd.cover < 0 || nd.cover >= static_cast<int>(atoms.size())) {
      bad.push_back("node " + std::to_string(i) + " has no cover");
      continue;
    }
    if (!subset(to_set(nd.bag), to_set(atoms[nd.cover].vars)))
      bad.push_back("node " + std::to_string(i) + " bag is not covered by its atom");
  }
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    VarSet av = to_set(atoms[a].vars);
    bool ok = std::any_of(h.nodes.begin(), h.nodes.end(), [&](const Ghd::Node& nd) {
      return nd.cover == static_cast<int>(a) && subset(av, to_set(nd.bag));
    });
    if (!ok) bad.push_back("atom " + std::to_string(a) + " has no complete node");
  }
  VarSet all;
  for (const auto& nd : h.nodes) all.insert(nd.bag.begin(), nd.bag.end());
  for (const auto& v : all) {
    int tops = 0;
    for (const auto& nd : h.nodes) {
      bool has = std::find(nd.bag.begin(), nd.bag.end(), v) != nd.bag.end();
      bool parent_has = nd.parent >= 0 &&
                        std::find(h.nodes[nd.parent].bag.begin(), h.nodes[nd.parent].bag.end(), v) !=
                            h.nodes[nd.parent].bag.end();
      if (has && !parent_has) ++tops;
    }
    if (tops != 1) bad.push_back("variable " + v + " is not connected");
  }
  if (!h.nodes[h.root].connex) bad.push_back("root is not in the connex set");
  VarSet uvars;
  for (std::size_t i = 0; i < h.nodes.size(); ++i) {
    const auto& nd = h.nodes[i];
    if (!nd.connex) continue;
    if (nd.parent >= 0 && !h.nodes[nd.parent].connex) bad.push_back("connex set is not a rooted subtree");
    uvars.insert(nd.bag.begin(), nd.bag.end());
  }
  if (uvars != free_set) bad.push_back("connex bags do not cover exactly the free variables");
  return bad;
}

// ---------------------------------------------------------------------------
// Query plans

int QueryPlan::var_id(const std::string& name) const {
  auto it = std::find(var_names.begin(), var_names.end(), name);
  return it == var_names.end() ? -1 : static_cast<int>(it - var_names.begin());
}

std::vector<int> QueryPlan::frontier() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].connex) continue;
    bool inner = std::any_of(nodes[i].children.begin(), nodes[i].children.end(),
                             [&](int c) { return nodes[c].connex; });
    if (!inner) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> QueryPlan::post_order() const {
  std::vector<int> out;
  if (root < 0) return out;
  std::vector<std::pair<int, bool>> stack{{root, false}};
  while (!stack.empty()) {
    auto [x, done] = stack.back();
    stack.pop_back();
    if (done) {
      out.push_back(x);
      continue;
    }
    stack.emplace_back(x, true);
    for (auto it = nodes[x].children.rbegin(); it != nodes[x].children.rend(); ++it) stack.emplace_back(*it, false);
  }
  return out;
}

namespace {

/** Unnormalized tree: interior nodes may have any number of children. */
struct RawPlan {
  std::vector<int> vars;
  int atom = -1;
  bool filter = false;
  bool connex = false;
  std::vector<RawPlan> children;
};

std::vector<int> sorted_ids(const QueryPlan& p, const std::vector<std::string>& names) {
  std::set<int> ids;
  for (const auto& n : names) ids.insert(p.var_id(n));
  return std::vector<int>(ids.begin(), ids.end());
}

bool ids_subset(const std::vector<int>& a, const std::vector<int>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

std::vector<int> ids_intersect(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

QueryPlan plan_skeleton(const ConjunctiveQuery& q) {
  QueryPlan p;
  p.atoms = q.atoms;
  p.free_vars = rel_free_vars(q);
  for (const auto& v : p.free_vars) p.var_names.push_back(v);
  for (const auto& a : q.atoms)
    for (const auto& v : a.vars)
      if (std::find(p.var_names.begin(), p.var_names.end(), v) == p.var_names.end()) p.var_names.push_back(v);
  return p;
}

class Normalizer {
 public:
  Normalizer(QueryPlan& p, bool guarded) : p_(p), guarded_(guarded) {}

  int build(const RawPlan& r) {
    if (r.atom >= 0) return add(r.vars, r.atom, r.filter, r.connex, {});
    if (r.children.empty()) throw InternalError("interior plan node without children");
    std::vector<int> kids;
    for (const auto& c : r.children) kids.push_back(build(c));
    if (kids.size() == 1) {
      if (!ids_subset(r.vars, p_.nodes[kids[0]].vars)) throw InternalError("plan node without guard");
      return add(r.vars, -1, false, r.connex, kids);
    }
    for (int& k : kids) {
      const PlanNode& kn = p_.nodes[k];
      bool wrap = !ids_subset(kn.vars, r.vars) || kn.connex != r.connex || (guarded_ && kn.vars != r.vars);
      if (wrap) k = add(ids_intersect(kn.vars, r.vars), -1, false, r.connex, {k});
    }
    auto g = std::find_if(kids.begin(), kids.end(), [&](int k) { return p_.nodes[k].vars == r.vars; });
    if (g == kids.end()) {
      // no child has the node's variables: the caller must have supplied a guard
      throw InternalError("plan node without guard");
    }
    std::rotate(kids.begin(), g, g + 1);
    int cur = kids[0];
    for (std::size_t i = 1; i + 1 < kids.size(); ++i) cur = add(r.vars, -1, false, r.connex, {cur, kids[i]});
    return add(r.vars, -1, false, r.connex, {cur, kids.back()});
  }

 private:
  int add(std::vector<int> vars, int atom, bool filter, bool connex, std::vector<int> children) {
    int id = static_cast<int>(p_.nodes.size());
    PlanNode n;
    n.vars = std::move(vars);
    n.atom = atom;
    n.filter = filter;
    n.connex = connex && atom < 0;
    n.children = std::move(children);
    for (int c : n.children) p_.nodes[c].parent = id;
    p_.nodes.push_back(std::move(n));
    return id;
  }

  QueryPlan& p_;
  bool guarded_;
};

void finish(QueryPlan& p, const RawPlan& raw, bool guarded) {
  Normalizer norm(p, guarded);
  p.root = norm.build(raw);
  p.guarded = guarded;
}

}  // namespace

QueryPlan ghd_to_plan(const Ghd& h, const ConjunctiveQuery& q) {
  QueryPlan p = plan_skeleton(q);
  if (q.atoms.empty()) return p;
  if (h.root < 0) throw InternalError("malformed GHD: no root");

  // each atom becomes a leaf under the first complete node it covers
  std::vector<int> leaf_home(q.atoms.size(), -1);
  std::vector<int> order{h.root};
  for (std::size_t i = 0; i < order.size(); ++i)
    for (int c : h.nodes[order[i]].children) order.push_back(c);
  for (int t : order) {
    const auto& nd = h.nodes[t];
    if (leaf_home[nd.cover] < 0 && to_set(nd.bag) == to_set(q.atoms[nd.cover].vars)) leaf_home[nd.cover] = t;
  }
  for (std::size_t a = 0; a < q.atoms.size(); ++a)
    if (leaf_home[a] < 0) throw InternalError("malformed GHD: atom " + std::to_string(a) + " has no complete node");

  // non-connex subtrees hosting no atom only repeat information and are dropped
  std::vector<bool> hosts(h.nodes.size(), false);
  for (int a : leaf_home) hosts[a] = true;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (hosts[*it] && h.nodes[*it].parent >= 0) hosts[h.nodes[*it].parent] = true;

  std::function<RawPlan(int)> raw = [&](int t) {
    const auto& nd = h.nodes[t];
    RawPlan r;
    r.vars = sorted_ids(p, nd.bag);
    r.connex = nd.connex;
    for (std::size_t a = 0; a < q.atoms.size(); ++a)
      if (leaf_home[a] == t) {
        RawPlan leaf;
        leaf.atom = static_cast<int>(a);
        leaf.vars = sorted_ids(p, q.atoms[a].vars);
        r.children.push_back(std::move(leaf));
      }
    for (int c : nd.children)
      if (hosts[c] || h.nodes[c].connex) r.children.push_back(raw(c));
    bool guarded = std::any_of(r.children.begin(), r.children.end(),
                               [&](const RawPlan& c) { return ids_subset(r.vars, c.vars); });
    if (!guarded) {
      RawPlan leaf;
      leaf.atom = nd.cover;
      leaf.filter = true;
      leaf.vars = r.vars;
      r.children.insert(r.children.begin(), std::move(leaf));
    }
    return r;
  };
  finish(p, raw(h.root), false);
  return p;
}

std::optional<QueryPlan> build_fc_plan(const ConjunctiveQuery& q) {
  auto h = build_fc_ghd(q);
  if (!h) return std::nullopt;
  return ghd_to_plan(*h, q);
}

std::optional<QueryPlan> build_guarded_plan(const ConjunctiveQuery& q) {
  if (!is_q_hierarchical(q)) return std::nullopt;
  QueryPlan p = plan_skeleton(q);
  if (q.atoms.empty()) {
    p.guarded = true;
    return p;
  }
  std::size_t nv = p.var_names.size();
  std::vector<std::set<int>> occ(nv);
  for (std::size_t a = 0; a < q.atoms.size(); ++a)
    for (const auto& v : q.atoms[a].vars) occ[p.var_id(v)].insert(static_cast<int>(a));
  std::vector<bool> is_free(nv);
  for (std::size_t v = 0; v < nv; ++v) is_free[v] = q.is_free(p.var_names[v]);

  // classes: variables with equal atom sets and equal freeness
  std::map<std::pair<std::set<int>, bool>, int> class_of_key;
  std::vector<std::pair<std::set<int>, bool>> keys;
  std::vector<std::vector<int>> members;
  std::vector<int> var_class(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    auto key = std::make_pair(occ[v], !is_free[v]);
    auto [it, fresh] = class_of_key.emplace(key, static_cast<int>(keys.size()));
    if (fresh) {
      keys.push_back(key);
      members.emplace_back();
    }
    members[it->second].push_back(static_cast<int>(v));
    var_class[v] = it->second;
  }
  std::size_t nc = keys.size();
  // parent: same atoms with free flag, else the smallest strict superset (bound variant preferred)
  auto above = [&](int c, int d) {
    const auto& [sc, bc] = keys[c];
    const auto& [sd, bd] = keys[d];
    if (sc == sd) return bc && !bd;
    return sc.size() < sd.size() && std::includes(sd.begin(), sd.end(), sc.begin(), sc.end());
  };
  std::vector<int> cparent(nc, -1);
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<int> cands;
    for (std::size_t d = 0; d < nc; ++d)
      if (above(static_cast<int>(c), static_cast<int>(d))) cands.push_back(static_cast<int>(d));
    // the deepest candidate lies below every other one
    for (int d : cands)
      if (std::all_of(cands.begin(), cands.end(), [&](int e) { return e == d || above(d, e); })) cparent[c] = d;
    if (!cands.empty() && cparent[c] < 0) return std::nullopt;
  }
  std::vector<std::vector<int>> path_vars(nc);
  std::function<const std::vector<int>&(int)> path = [&](int c) -> const std::vector<int>& {
    if (!path_vars[c].empty()) return path_vars[c];
    std::vector<int> vs = members[c];
    if (cparent[c] >= 0) {
      const auto& up = path(cparent[c]);
      vs.insert(vs.end(), up.begin(), up.end());
    }
    std::sort(vs.begin(), vs.end());
    path_vars[c] = vs;
    return path_vars[c];
  };
  for (std::size_t c = 0; c < nc; ++c) path(static_cast<int>(c));

  // atoms hang below the deepest class among their variables
  std::vector<std::vector<int>> class_atoms(nc);
  std::vector<int> root_atoms;
  for (std::size_t a = 0; a < q.atoms.size(); ++a) {
    std::vector<int> ids = sorted_ids(p, q.atoms[a].vars);
    if (ids.empty()) {
      root_atoms.push_back(static_cast<int>(a));
      continue;
    }
    int home = -1;
    for (int v : ids)
      if (path_vars[var_class[v]] == ids) home = var_class[v];
    if (home < 0) return std::nullopt;  // not hierarchical after all
    class_atoms[home].push_back(static_cast<int>(a));
  }
  std::vector<std::vector<int>> class_children(nc);
  std::vector<int> top;
  for (std::size_t c = 0; c < nc; ++c) {
    if (cparent[c] >= 0)
      class_children[cparent[c]].push_back(static_cast<int>(c));
    else
      top.push_back(static_cast<int>(c));
  }
  auto by_first_var = [&](int a, int b) { return members[a].front() < members[b].front(); };
  for (auto& ch : class_children) std::sort(ch.begin(), ch.end(), by_first_var);
  std::sort(top.begin(), top.end(), by_first_var);

  auto all_free = [&](const std::vector<int>& ids) {
    return std::all_of(ids.begin(), ids.end(), [&](int v) { return is_free[v]; });
  };
  std::function<RawPlan(int)> raw = [&](int c) {
    RawPlan r;
    r.vars = path_vars[c];
    r.connex = all_free(r.vars);
    for (int a : class_atoms[c]) {
      RawPlan leaf;
      leaf.atom = a;
      leaf.vars = r.vars;
      r.children.push_back(std::move(leaf));
    }
    for (int d : class_children[c]) r.children.push_back(raw(d));
    return r;
  };

  RawPlan root;
  if (top.size() == 1 && root_atoms.empty()) {
    root = raw(top[0]);
    if (!root.connex) {
      // a bound-only top class still needs a connex root above it
      RawPlan r;
      r.connex = true;
      r.children.push_back(std::move(root));
      root = std::move(r);
    }
  } else {
    root.connex = true;
    for (int a : root_atoms) {
      RawPlan leaf;
      leaf.atom = a;
      root.children.push_back(std::move(leaf));
    }
    for (int c : top) root.children.push_back(raw(c));
  }
  finish(p, root, true);
  return p;
}

std::vector<std::string> check_plan(const QueryPlan& p, const ConjunctiveQuery& q) {
  std::vector<std::string> bad;
  auto name = [](int i) { return "node " + std::to_string(i); };
  if (q.atoms.empty()) {
    if (p.root >= 0 || !p.nodes.empty()) bad.push_back("plan of a query without atoms must be empty");
    return bad;
  }
  if (p.root < 0 || p.root >= static_cast<int>(p.nodes.size())) {
    bad.push_back("missing root");
    return bad;
  }
  if (p.nodes[p.root].parent != -1) bad.push_back("root has a parent");
  if (p.post_order().size() != p.nodes.size()) bad.push_back("nodes unreachable from the root");

  std::vector<int> real_leaves(q.atoms.size(), 0);
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    const auto& n = p.nodes[i];
    for (int c : n.children)
      if (p.nodes[c].parent != static_cast<int>(i)) bad.push_back(name(static_cast<int>(i)) + " child/parent mismatch");
    if (!std::is_sorted(n.vars.begin(), n.vars.end())) bad.push_back(name(static_cast<int>(i)) + " vars not sorted");
    if (n.is_leaf()) {
      if (!n.children.empty()) bad.push_back(name(static_cast<int>(i)) + " leaf with children");
      if (n.connex) bad.push_back(name(static_cast<int>(i)) + " leaf in the connex set");
      auto av = sorted_ids(p, q.atoms[n.atom].vars);
      if (n.filter) {
        if (!ids_subset(n.vars, av)) bad.push_back(name(static_cast<int>(i)) + " filter leaf outside its atom");
      } else {
        ++real_leaves[n.atom];
        if (n.vars != av) bad.push_back(name(static_cast<int>(i)) + " leaf vars differ from its atom");
      }
      continue;
    }
    if (n.children.empty() || n.children.size() > 2) bad.push_back(name(static_cast<int>(i)) + " has " + std::to_string(n.children.size()) + " children");
    bool has_guard = std::any_of(n.children.begin(), n.children.end(),
                                 [&](int c) { return ids_subset(n.vars, p.nodes[c].vars); });
    if (!has_guard) bad.push_back(name(static_cast<int>(i)) + " has no guard child");
    if (n.children.size() == 2) {
      for (int c : n.children)
        if (!ids_subset(p.nodes[c].vars, n.vars)) bad.push_back(name(static_cast<int>(i)) + " is not normalized");
      if (p.guarded)
        for (int c : n.children)
          if (p.nodes[c].vars != n.vars) bad.push_back(name(static_cast<int>(i)) + " is not guarded-normalized");
    }
    if (p.guarded)
      for (int c : n.children)
        if (!ids_subset(n.vars, p.nodes[c].vars)) bad.push_back(name(static_cast<int>(i)) + " child is not a guard");
  }
  for (std::size_t a = 0; a < q.atoms.size(); ++a)
    if (real_leaves[a] != 1) bad.push_back("atom " + std::to_string(a) + " appears " + std::to_string(real_leaves[a]) + " times");

  for (std::size_t v = 0; v < p.var_names.size(); ++v) {
    int tops = 0;
    for (const auto& n : p.nodes) {
      bool has = std::binary_search(n.vars.begin(), n.vars.end(), static_cast<int>(v));
      bool up = n.parent >= 0 && std::binary_search(p.nodes[n.parent].vars.begin(), p.nodes[n.parent].vars.end(), static_cast<int>(v));
      if (has && !up) ++tops;
    }
    if (tops != 1) bad.push_back("variable " + p.var_names[v] + " is not connected");
  }

  if (!p.nodes[p.root].connex) bad.push_back("root is not connex");
  std::set<int> nvars;
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    const auto& n = p.nodes[i];
    if (!n.connex) continue;
    nvars.insert(n.vars.begin(), n.vars.end());
    if (n.parent >= 0) {
      if (!p.nodes[n.parent].connex) bad.push_back(name(static_cast<int>(i)) + " connex set not rooted");
      for (int s : p.nodes[n.parent].children)
        if (!p.nodes[s].connex) bad.push_back(name(static_cast<int>(i)) + " connex set not sibling-closed");
    }
  }
  std::set<int> free_ids;
  for (const auto& v : p.free_vars) free_ids.insert(p.var_id(v));
  if (nvars != free_ids) bad.push_back("connex variables differ from the free variables");
  return bad;
}

nlohmann::json plan_to_json(const QueryPlan& p) {
  nlohmann::json j;
  j["root"] = p.root;
  j["guarded"] = p.guarded;
  j["variables"] = p.var_names;
  j["free"] = p.free_vars;
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    const auto& n = p.nodes[i];
    nlohmann::json o;
    o["id"] = i;
    std::vector<std::string> vars;
    for (int v : n.vars) vars.push_back(p.var_names[v]);
    o["vars"] = vars;
    if (n.is_leaf()) {
      const auto& a = p.atoms[n.atom];
      o["atom"] = a.relation + "(" + [&] {
        std::string s;
        for (std::size_t k = 0; k < a.vars.size(); ++k) s += (k ? "," : "") + a.vars[k];
        return s;
      }() + ")";
      if (n.filter) o["filter"] = true;
    }
    o["children"] = n.children;
    o["connex"] = n.connex;
    int guard = -1;
    for (int c : n.children)
      if (guard < 0 && std::includes(p.nodes[c].vars.begin(), p.nodes[c].vars.end(), n.vars.begin(), n.vars.end()))
        guard = c;
    if (!n.is_leaf()) o["guard"] = guard;
    nodes.push_back(o);
  }
  j["nodes"] = nodes;
  j["frontier"] = p.frontier();
  return j;
}

std::string plan_to_dot(const QueryPlan& p) {
  std::ostringstream os;
  os << "digraph plan {\n  node [shape=box];\n";
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    const auto& n = p.nodes[i];
    std::string label;
    if (n.is_leaf()) {
      const auto& a = p.atoms[n.atom];
      label = (n.filter ? "filter " : "") + a.relation + "(";
      for (std::size_t k = 0; k < a.vars.size(); ++k) label += (k ? "," : "") + a.vars[k];
      label += ")";
    } else {
      label = "{";
      for (std::size_t k = 0; k < n.vars.size(); ++k) label += (k ? "," : "") + p.var_names[n.vars[k]];
      label += "}";
    }
    os << "  n" << i << " [label=\"" << label << "\"";
    if (n.connex) os << ", style=filled, fillcolor=lightblue";
    if (n.is_leaf()) os << ", shape=ellipse";
    os << "];\n";
  }
  for (std::size_t i = 0; i < p.nodes.size(); ++i)
    for (int c : p.nodes[i].children) os << "  n" << i << " -> n" << c << ";\n";
  os << "}\n";
  return os.str();
}

nlohmann::json ghd_to_json(const Ghd& h) {
  nlohmann::json j;
  j["root"] = h.root;
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < h.nodes.size(); ++i) {
    const auto& n = h.nodes[i];
    nodes.push_back({{"id", i}, {"bag", n.bag}, {"cover", n.cover}, {"parent", n.parent},
                     {"children", n.children}, {"connex", n.connex}});
  }
  j["nodes"] = nodes;
  j["connex_size"] = h.connex_size();
  return j;
}

}  // namespace deltaenum
