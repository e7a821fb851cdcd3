#include "deltaenum/engine_static.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "deltaenum/errors.hpp"
#include "engine_core.hpp"

namespace deltaenum {

// ---------------------------------------------------------------------------
// Node storage

void NodeStore::grow_arrays() {
  std::size_t n = table.id_bound();
  if (mode != NodeMode::Sup && ann.size() < n) ann.resize(n);
  if (mode == NodeMode::Sup) {
    if (ext.size() < n) ext.resize(n);
    if (ptr1.size() < n) {
      ptr1.resize(n);
      ptr2.resize(n);
    }
  }
  if (ext_pos.size() < n) ext_pos.resize(n);
}

namespace {

std::vector<int> slots_of(const std::vector<int>& sub, const std::vector<int>& super) {
  std::vector<int> out;
  for (int v : sub) {
    auto it = std::lower_bound(super.begin(), super.end(), v);
    if (it == super.end() || *it != v) throw InternalError("variable set is not contained in its guard");
    out.push_back(static_cast<int>(it - super.begin()));
  }
  return out;
}

void project(std::span<const Datum> t, const std::vector<int>& slots, std::vector<Datum>& out) {
  out.resize(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) out[i] = t[slots[i]];
}

}  // namespace

PlanCore::PlanCore(QueryPlan p, const ConjunctiveQuery& q, const QuerySplit& sp, const Database& db)
    : plan(std::move(p)), semiring(db.semiring()) {
  std::size_t n = plan.nodes.size();
  nodes.resize(n);
  leaves.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PlanNode& pn = plan.nodes[i];
    NodeStore& st = nodes[i];
    st.table = TupleTable(pn.vars.size());
    st.acc_keys = TupleTable(pn.vars.size());
    if (pn.is_leaf()) {
      st.mode = NodeMode::Leaf;
    } else {
      bool inner = std::any_of(pn.children.begin(), pn.children.end(), [&](int c) { return plan.nodes[c].connex; });
      st.mode = pn.connex && inner ? NodeMode::Sup : NodeMode::Agg;
    }
    if (pn.parent >= 0) {
      const PlanNode& par = plan.nodes[pn.parent];
      bool guard_side = std::includes(pn.vars.begin(), pn.vars.end(), par.vars.begin(), par.vars.end());
      if (guard_side) st.to_parent = slots_of(par.vars, pn.vars);
    }
    if (pn.children.size() == 2) {
      if (plan.nodes[pn.children[0]].vars != pn.vars) throw InternalError("first child of a join node must be its guard");
      st.to_second = slots_of(plan.nodes[pn.children[1]].vars, pn.vars);
    }
    if (pn.is_leaf()) {
      const RelAtom& atom = plan.atoms[pn.atom];
      LeafSpec& L = leaves[i];
      L.relation = atom.relation;
      L.arity = atom.vars.size();
      if (!db.has_relation(atom.relation)) throw VocabularyError("unknown relation symbol '" + atom.relation + "'");
      if (db.relation(atom.relation).arity() != L.arity)
        throw SchemaError("atom " + atom.relation + " has " + std::to_string(L.arity) + " arguments, relation arity is " +
                          std::to_string(db.relation(atom.relation).arity()));
      std::vector<int> distinct;
      for (const auto& v : atom.vars) distinct.push_back(plan.var_id(v));
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      L.distinct = distinct.size();
      for (const auto& v : atom.vars) L.slot_of_pos.push_back(slots_of({plan.var_id(v)}, distinct)[0]);
      for (std::size_t ci : sp.covered[pn.atom]) {
        const IneqAtom& c = q.ineqs[ci];
        L.checks.emplace_back(slots_of({plan.var_id(c.var)}, distinct)[0], db.constant(c.constant));
      }
      L.project = slots_of(pn.vars, distinct);
    }
  }

  if (plan.root >= 0) {
    schedule.push_back({plan.root, Step::Kind::Root, -1});
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      int x = schedule[i].node;
      const PlanNode& pn = plan.nodes[x];
      if (nodes[x].mode != NodeMode::Sup) {
        frontier.push_back(x);
        continue;
      }
      if (pn.children.size() == 1) {
        schedule.push_back({pn.children[0], Step::Kind::Choice, x});
      } else {
        schedule.push_back({pn.children[0], Step::Kind::First, x});
        schedule.push_back({pn.children[1], Step::Kind::Second, x});
      }
    }
    for (const auto& v : plan.free_vars) {
      int id = plan.var_id(v);
      bool found = false;
      for (int f : frontier) {
        const auto& vs = plan.nodes[f].vars;
        auto it = std::lower_bound(vs.begin(), vs.end(), id);
        if (it != vs.end() && *it == id) {
          free_source.emplace_back(f, static_cast<int>(it - vs.begin()));
          found = true;
          break;
        }
      }
      if (!found) throw InternalError("free variable " + v + " is not covered by the frontier");
    }
  }
}

bool PlanCore::leaf_key(int node, std::span<const Datum> base, std::vector<Datum>& scratch,
                        std::vector<Datum>& key) const {
  const LeafSpec& L = leaves[node];
  scratch.assign(L.distinct, 0);
  for (std::size_t j = 0; j < L.arity; ++j) {
    Datum& s = scratch[L.slot_of_pos[j]];
    if (s == 0)
      s = base[j];
    else if (s != base[j])
      return false;
  }
  for (auto [slot, bound] : L.checks)
    if (scratch[slot] > bound) return false;
  key.resize(L.project.size());
  for (std::size_t k = 0; k < L.project.size(); ++k) key[k] = scratch[L.project[k]];
  return true;
}

void PlanCore::build_static(const Database& db) {
  std::vector<Datum> scratch, key;
  for (int x : plan.post_order()) {
    const PlanNode& pn = plan.nodes[x];
    NodeStore& st = nodes[x];
    if (pn.is_leaf()) {
      const AnnotatedRelation& rel = db.relation(leaves[x].relation);
      st.table.reserve(rel.size());
      rel.for_each([&](std::span<const Datum> t, Value v) {
        if (!leaf_key(x, t, scratch, key)) return;
        auto [id, fresh] = st.table.insert(key);
        st.grow_arrays();
        if (pn.filter)
          st.ann[id] = semiring.one();
        else
          st.ann[id] = v;  // pattern-matched tuples map injectively
        (void)fresh;
      });
      continue;
    }
    if (pn.children.size() == 1) {
      int c = pn.children[0];
      NodeStore& cs = nodes[c];
      for (std::uint32_t cid : cs.table.live()) {
        project(cs.table.tuple(cid), cs.to_parent, key);
        auto [pid, fresh] = st.table.insert(key);
        st.grow_arrays();
        if (st.mode == NodeMode::Sup) {
          cs.ext_pos[cid] = static_cast<std::uint32_t>(st.ext[pid].size());
          st.ext[pid].push_back(cid);
        } else {
          st.ann[pid] = fresh ? cs.ann[cid] : semiring.add(st.ann[pid], cs.ann[cid]);
        }
      }
      if (st.mode == NodeMode::Agg) {
        std::vector<std::uint32_t> zeros;
        for (std::uint32_t id : st.table.live())
          if (semiring.is_zero(st.ann[id])) zeros.push_back(id);
        for (std::uint32_t id : zeros) st.table.erase(id);
      }
      continue;
    }
    int c1 = pn.children[0], c2 = pn.children[1];
    NodeStore& s1 = nodes[c1];
    NodeStore& s2 = nodes[c2];
    for (std::uint32_t id1 : s1.table.live()) {
      auto t = s1.table.tuple(id1);
      project(t, st.to_second, key);
      std::uint32_t id2 = s2.table.find(key);
      if (id2 == TupleTable::npos) continue;
      auto [pid, fresh] = st.table.insert(t);
      st.grow_arrays();
      if (st.mode == NodeMode::Sup) {
        st.ptr1[pid] = id1;
        st.ptr2[pid] = id2;
      } else {
        st.ann[pid] = semiring.mul(s1.ann[id1], s2.ann[id2]);
      }
    }
  }
}

std::vector<std::string> PlanCore::check() const {
  std::vector<std::string> bad;
  std::vector<Datum> key;
  auto where = [](int x) { return "node " + std::to_string(x) + ": "; };
  for (std::size_t xi = 0; xi < plan.nodes.size(); ++xi) {
    int x = static_cast<int>(xi);
    const PlanNode& pn = plan.nodes[x];
    const NodeStore& st = nodes[x];
    if (st.mode != NodeMode::Sup)
      for (std::uint32_t id : st.table.live())
        if (semiring.is_zero(st.ann[id])) bad.push_back(where(x) + "stored zero annotation");
    if (pn.is_leaf()) continue;
    if (pn.children.size() == 1) {
      const NodeStore& cs = nodes[pn.children[0]];
      std::map<std::vector<Datum>, std::vector<std::uint32_t>> groups;
      for (std::uint32_t cid : cs.table.live()) {
        project(cs.table.tuple(cid), cs.to_parent, key);
        groups[key].push_back(cid);
      }
      std::size_t expected = 0;
      for (const auto& [k, members] : groups) {
        std::uint32_t pid = st.table.find(k);
        if (st.mode == NodeMode::Sup) {
          ++expected;
          if (pid == TupleTable::npos) {
            bad.push_back(where(x) + "missing projection of a child tuple");
            continue;
          }
          std::vector<std::uint32_t> a = st.ext[pid], b = members;
          std::sort(a.begin(), a.end());
          std::sort(b.begin(), b.end());
          if (a != b) bad.push_back(where(x) + "extension list differs from child tuples");
          for (std::size_t i = 0; i < st.ext[pid].size(); ++i)
            if (cs.ext_pos[st.ext[pid][i]] != i) bad.push_back(where(x) + "stale extension backpointer");
        } else {
          Value sum = semiring.zero();
          for (std::uint32_t cid : members) sum = semiring.add(sum, cs.ann[cid]);
          if (dynamic) {
            std::uint32_t aid = st.acc_keys.find(k);
            if (aid == TupleTable::npos || st.accs[aid].size() != members.size() ||
                !semiring.approx_equal(st.accs[aid].total(), sum, 1e-6))
              bad.push_back(where(x) + "accumulator differs from child multiset");
          }
          if (semiring.is_zero(sum)) {
            if (pid != TupleTable::npos) bad.push_back(where(x) + "zero sum stored");
            continue;
          }
          ++expected;
          if (pid == TupleTable::npos)
            bad.push_back(where(x) + "missing aggregated tuple");
          else if (!semiring.approx_equal(st.ann[pid], sum, 1e-9))
            bad.push_back(where(x) + "aggregate differs from child sum");
        }
      }
      if (st.table.size() != expected) bad.push_back(where(x) + "tuple without child support");
      if (dynamic && st.mode == NodeMode::Agg && st.acc_keys.size() != groups.size())
        bad.push_back(where(x) + "stale accumulator entries");
      continue;
    }
    const NodeStore& s1 = nodes[pn.children[0]];
    const NodeStore& s2 = nodes[pn.children[1]];
    std::size_t expected = 0;
    for (std::uint32_t id1 : s1.table.live()) {
      auto t = s1.table.tuple(id1);
      project(t, st.to_second, key);
      std::uint32_t id2 = s2.table.find(key);
      std::uint32_t pid = st.table.find(t);
      if (id2 == TupleTable::npos) {
        if (pid != TupleTable::npos) bad.push_back(where(x) + "join tuple without partner");
        continue;
      }
      ++expected;
      if (pid == TupleTable::npos) {
        bad.push_back(where(x) + "missing join tuple");
        continue;
      }
      if (st.mode == NodeMode::Sup) {
        if (st.ptr1[pid] != id1 || st.ptr2[pid] != id2) bad.push_back(where(x) + "stale child pointers");
      } else if (!semiring.approx_equal(st.ann[pid], semiring.mul(s1.ann[id1], s2.ann[id2]), 1e-9)) {
        bad.push_back(where(x) + "join annotation differs from product");
      }
    }
    if (st.table.size() != expected) bad.push_back(where(x) + "join tuple count differs");
  }
  return bad;
}

// Sup nodes keep only their support; the value is rebuilt from the frontier below them.
Value PlanCore::semantic_value(int x, std::uint32_t id) const {
  const NodeStore& st = nodes[x];
  if (st.mode != NodeMode::Sup) return st.ann[id];
  const auto& kids = plan.nodes[x].children;
  if (kids.size() == 2) return semiring.mul(semantic_value(kids[0], st.ptr1[id]), semantic_value(kids[1], st.ptr2[id]));
  Value sum = semiring.zero();
  for (std::uint32_t c : st.ext[id]) sum = semiring.add(sum, semantic_value(kids[0], c));
  return sum;
}

std::vector<std::pair<Tuple, Value>> PlanCore::entries(int x) const {
  const NodeStore& st = nodes.at(x);
  std::vector<std::pair<Tuple, Value>> out;
  for (std::uint32_t id : st.table.live()) {
    auto t = st.table.tuple(id);
    out.emplace_back(Tuple(t.begin(), t.end()), semantic_value(x, id));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

// ---------------------------------------------------------------------------
// Connex cursor

ConnexCursor::ConnexCursor(const PlanCore& core)
    : core_(core), entry_(core.plan.nodes.size()), pos_(core.schedule.size()), empty_plan_(core.plan.root < 0) {}

const std::vector<std::uint32_t>& ConnexCursor::choices(std::size_t i) const {
  const auto& step = core_.schedule[i];
  if (step.kind == PlanCore::Step::Kind::Root) return core_.nodes[step.node].table.live();
  return core_.nodes[step.parent].ext[entry_[step.parent]];
}

void ConnexCursor::settle(std::size_t from) {
  for (std::size_t i = from; i < core_.schedule.size(); ++i) {
    const auto& step = core_.schedule[i];
    if (i > from) pos_[i] = 0;
    switch (step.kind) {
      case PlanCore::Step::Kind::Root:
      case PlanCore::Step::Kind::Choice: entry_[step.node] = choices(i)[pos_[i]]; break;
      case PlanCore::Step::Kind::First: entry_[step.node] = core_.nodes[step.parent].ptr1[entry_[step.parent]]; break;
      case PlanCore::Step::Kind::Second: entry_[step.node] = core_.nodes[step.parent].ptr2[entry_[step.parent]]; break;
    }
  }
}

bool ConnexCursor::start() {
  done_ = false;
  if (empty_plan_) return true;
  if (core_.nodes[core_.plan.root].table.empty()) {
    done_ = true;
    return false;
  }
  pos_[0] = 0;
  settle(0);
  return true;
}

bool ConnexCursor::advance() {
  if (done_ || empty_plan_) {
    done_ = true;
    return false;
  }
  for (std::size_t i = core_.schedule.size(); i-- > 0;) {
    auto kind = core_.schedule[i].kind;
    if (kind != PlanCore::Step::Kind::Root && kind != PlanCore::Step::Kind::Choice) continue;
    if (pos_[i] + 1 < choices(i).size()) {
      ++pos_[i];
      settle(i);
      return true;
    }
  }
  done_ = true;
  return false;
}

Value ConnexCursor::annotation() const {
  Value a = core_.semiring.one();
  for (int f : core_.frontier) a = core_.semiring.mul(a, core_.nodes[f].ann[entry_[f]]);
  return a;
}

void ConnexCursor::read(std::vector<Datum>& out) const {
  out.resize(core_.free_source.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto [node, slot] = core_.free_source[i];
    out[i] = core_.nodes[node].table.tuple(entry_[node])[slot];
  }
}

// ---------------------------------------------------------------------------
// Inequalities and reduction

IneqPlanState plan_inequalities(const ConjunctiveQuery& ineq_part, const Database& db) {
  const Semiring& s = db.semiring();
  std::map<std::string, Datum> bound;
  for (const auto& c : ineq_part.ineqs) {
    Datum v = db.constant(c.constant);
    auto it = bound.find(c.var);
    if (it == bound.end())
      bound.emplace(c.var, v);
    else
      it->second = std::min(it->second, v);
  }
  IneqPlanState st;
  for (const auto& v : ineq_part.free_vars()) {
    auto it = bound.find(v);
    if (it == bound.end()) throw InternalError("free variable " + v + " of the inequality part has no bound");
    st.free_vars.push_back(v);
    st.bounds.push_back(it->second);
  }
  unsigned __int128 count = 1;
  for (const auto& [v, b] : bound) {
    if (ineq_part.is_free(v)) continue;
    count *= b;
    if (count > std::numeric_limits<std::uint64_t>::max())
      throw ConfigError("inequality ranges exceed 64-bit counting");
  }
  st.k = sum_of_ones(s, static_cast<std::uint64_t>(count));
  st.empty = s.is_zero(st.k);
  return st;
}

Database atomically_reduce(const Database& db, const ConjunctiveQuery& q) {
  Database out = db;
  QuerySplit sp = split(q);
  for (std::size_t a = 0; a < q.atoms.size(); ++a) {
    if (sp.covered[a].empty()) continue;
    const RelAtom& atom = q.atoms[a];
    AnnotatedRelation& rel = out.relation(atom.relation);
    if (rel.arity() != atom.vars.size()) throw SchemaError("atom " + atom.relation + " has the wrong arity");
    std::vector<Tuple> drop;
    rel.for_each([&](std::span<const Datum> t, Value) {
      std::map<std::string, Datum> nu;
      for (std::size_t j = 0; j < t.size(); ++j) {
        auto [it, fresh] = nu.emplace(atom.vars[j], t[j]);
        if (!fresh && it->second != t[j]) return;  // tuple does not match the atom's pattern
      }
      for (std::size_t ci : sp.covered[a]) {
        const IneqAtom& c = q.ineqs[ci];
        if (nu[c.var] > db.constant(c.constant)) {
          drop.emplace_back(t.begin(), t.end());
          return;
        }
      }
    });
    for (const auto& t : drop) rel.erase(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// State and enumeration

EnumerationState::EnumerationState(const ConjunctiveQuery& q, const QuerySplit& sp, QueryPlan plan, const Database& db)
    : query(q), split(sp), core(std::move(plan), q, sp, db) {
  refresh_ineq(db);
  for (const auto& v : q.head_vars) {
    const auto& rf = core.plan.free_vars;
    auto it = std::find(rf.begin(), rf.end(), v);
    if (it != rf.end()) {
      head_source.emplace_back(0, static_cast<int>(it - rf.begin()));
      continue;
    }
    const auto& inf = ineq.free_vars;
    auto jt = std::find(inf.begin(), inf.end(), v);
    if (jt == inf.end()) throw InternalError("head variable " + v + " has no source");
    head_source.emplace_back(1, static_cast<int>(jt - inf.begin()));
  }
}

void EnumerationState::refresh_ineq(const Database& db) { ineq = plan_inequalities(split.ineq_part, db); }

std::shared_ptr<const EnumerationState> preprocess(const ConjunctiveQuery& q, const Database& db) {
  if (!db.semiring().zero_divisor_free())
    throw CapabilityError("semiring '" + std::string(db.semiring().name()) + "' has zero divisors");
  q.validate();
  auto plan = build_fc_plan(q);
  if (!plan) throw ClassificationError("query is not free-connex: " + to_string(q));
  QuerySplit sp = split(q);
  auto st = std::make_shared<EnumerationState>(q, sp, std::move(*plan), db);
  st->core.build_static(db);
  return st;
}

const QueryPlan& state_plan(const EnumerationState& s) { return s.core.plan; }
const IneqPlanState& state_ineq(const EnumerationState& s) { return s.ineq; }
const ConjunctiveQuery& state_query(const EnumerationState& s) { return s.query; }

std::vector<std::size_t> state_node_sizes(const EnumerationState& s) {
  std::vector<std::size_t> out;
  for (const auto& n : s.core.nodes) out.push_back(n.table.size());
  return out;
}

std::vector<std::string> check_state(const EnumerationState& s) { return s.core.check(); }

std::vector<std::pair<Tuple, Value>> state_node_entries(const EnumerationState& s, int node) {
  return s.core.entries(node);
}

struct Enumerator::Impl {
  explicit Impl(std::shared_ptr<const EnumerationState> st) : state(std::move(st)), rel(state->core) {}

  std::shared_ptr<const EnumerationState> state;
  ConnexCursor rel;
  std::vector<Datum> rel_vals;
  std::vector<Datum> ineq_vals;
  Tuple out;
  Value ann;
  bool started = false;
  bool done = false;

  void emit() {
    rel.read(rel_vals);
    ann = state->core.semiring.mul(rel.annotation(), state->ineq.k);
    out.resize(state->head_source.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      auto [src, idx] = state->head_source[i];
      out[i] = src == 0 ? rel_vals[idx] : ineq_vals[idx];
    }
  }

  bool next() {
    if (done) return false;
    const IneqPlanState& iq = state->ineq;
    if (!started) {
      started = true;
      if (iq.empty || !rel.start()) {
        done = true;
        return false;
      }
      ineq_vals.assign(iq.bounds.size(), 1);
      emit();
      return true;
    }
    for (std::size_t i = ineq_vals.size(); i-- > 0;) {
      if (ineq_vals[i] < iq.bounds[i]) {
        ++ineq_vals[i];
        emit();
        return true;
      }
      ineq_vals[i] = 1;
    }
    if (!rel.advance()) {
      done = true;
      return false;
    }
    emit();
    return true;
  }
};

Enumerator::Enumerator(std::shared_ptr<const EnumerationState> state) : impl_(std::make_unique<Impl>(std::move(state))) {}
Enumerator::~Enumerator() = default;
Enumerator::Enumerator(Enumerator&&) noexcept = default;
Enumerator& Enumerator::operator=(Enumerator&&) noexcept = default;
bool Enumerator::next() { return impl_->next(); }
const Tuple& Enumerator::tuple() const { return impl_->out; }
Value Enumerator::annotation() const { return impl_->ann; }

AnnotatedRelation eval_materialized(const ConjunctiveQuery& q, const Database& db) {
  auto st = preprocess(q, db);
  AnnotatedRelation out(q.head_vars.size(), db.semiring());
  Enumerator e(st);
  while (e.next()) out.set(e.tuple(), e.annotation());
  return out;
}

// ---------------------------------------------------------------------------
// Generic evaluation

namespace {

/** Backtracking join over atoms with per-atom hash indices on already-bound variables. */
class JoinEvaluator {
 public:
  JoinEvaluator(const ConjunctiveQuery& q, const QuerySplit& sp, const Database& db, std::vector<std::string> out_vars)
      : q_(q), db_(db), s_(db.semiring()), out_vars_(std::move(out_vars)) {
    std::vector<std::string> names = q.all_vars();
    auto id = [&](const std::string& v) {
      return static_cast<int>(std::find(names.begin(), names.end(), v) - names.begin());
    };
    nvars_ = names.size();
    for (const auto& v : out_vars_) out_ids_.push_back(id(v));

    std::vector<bool> bound(nvars_, false), used(q.atoms.size(), false);
    for (std::size_t step = 0; step < q.atoms.size(); ++step) {
      int best = -1, best_score = -1;
      for (std::size_t a = 0; a < q.atoms.size(); ++a) {
        if (used[a]) continue;
        int score = 0;
        for (const auto& v : q.atoms[a].vars) score += bound[id(v)];
        if (score > best_score) {
          best = static_cast<int>(a);
          best_score = score;
        }
      }
      used[best] = true;
      const RelAtom& atom = q.atoms[best];
      const AnnotatedRelation& rel = db.relation(atom.relation);
      if (rel.arity() != atom.vars.size()) throw SchemaError("atom " + atom.relation + " has the wrong arity");
      Stage st;
      st.rel = &rel;
      std::vector<bool> seen_here(nvars_, false);
      for (std::size_t j = 0; j < atom.vars.size(); ++j) {
        int v = id(atom.vars[j]);
        st.pos_var.push_back(v);
        if (bound[v] && !seen_here[v]) {
          st.key_pos.push_back(static_cast<int>(j));
          st.key_var.push_back(v);
        }
        seen_here[v] = true;
      }
      for (std::size_t ci : sp.covered[best]) {
        const IneqAtom& c = q.ineqs[ci];
        st.checks.emplace_back(id(c.var), db.constant(c.constant));
      }
      st.keys = TupleTable(st.key_pos.size());
      std::vector<Datum> key(st.key_pos.size());
      rel.for_each([&](std::span<const Datum> t, Value) {
        for (std::size_t k = 0; k < st.key_pos.size(); ++k) key[k] = t[st.key_pos[k]];
        auto [kid, fresh] = st.keys.insert(key);
        if (st.lists.size() <= kid) st.lists.resize(kid + 1);
        st.lists[kid].push_back(rel.table().find(t));
      });
      for (int v : st.pos_var) bound[v] = true;
      stages_.push_back(std::move(st));
    }
  }

  AnnotatedRelation run() {
    AnnotatedRelation out(out_ids_.size(), s_);
    nu_.assign(nvars_, 0);
    Tuple key(out_ids_.size());
    recurse(0, s_.one(), out, key);
    return out;
  }

 private:
  struct Stage {
    const AnnotatedRelation* rel = nullptr;
    std::vector<int> pos_var;
    std::vector<int> key_pos, key_var;
    std::vector<std::pair<int, Datum>> checks;
    TupleTable keys;
    std::vector<std::vector<std::uint32_t>> lists;
  };

  void recurse(std::size_t i, Value acc, AnnotatedRelation& out, Tuple& key) {
    if (i == stages_.size()) {
      for (std::size_t k = 0; k < out_ids_.size(); ++k) key[k] = nu_[out_ids_[k]];
      out.add(key, acc);
      return;
    }
    Stage& st = stages_[i];
    std::vector<Datum> probe(st.key_var.size());
    for (std::size_t k = 0; k < probe.size(); ++k) probe[k] = nu_[st.key_var[k]];
    std::uint32_t kid = st.keys.find(probe);
    if (kid == TupleTable::npos) return;
    std::vector<int> assigned;
    for (std::uint32_t tid : st.lists[kid]) {
      auto t = st.rel->table().tuple(tid);
      bool ok = true;
      assigned.clear();
      for (std::size_t j = 0; j < t.size() && ok; ++j) {
        Datum& slot = nu_[st.pos_var[j]];
        if (slot == 0) {
          slot = t[j];
          assigned.push_back(st.pos_var[j]);
        } else if (slot != t[j]) {
          ok = false;
        }
      }
      for (auto [v, b] : st.checks)
        if (ok && nu_[v] > b) ok = false;
      if (ok) recurse(i + 1, s_.mul(acc, st.rel->value(tid)), out, key);
      for (int v : assigned) nu_[v] = 0;
    }
  }

  const ConjunctiveQuery& q_;
  const Database& db_;
  Semiring s_;
  std::vector<std::string> out_vars_;
  std::vector<int> out_ids_;
  std::size_t nvars_ = 0;
  std::vector<Stage> stages_;
  std::vector<Datum> nu_;
};

}  // namespace

AnnotatedRelation eval_general(const ConjunctiveQuery& q, const Database& db) {
  q.validate();
  QuerySplit sp = split(q);
  std::vector<std::string> rel_free = sp.rel_part.head_vars;
  AnnotatedRelation rel = JoinEvaluator(q, sp, db, rel_free).run();
  IneqPlanState iq = plan_inequalities(sp.ineq_part, db);
  const Semiring& s = db.semiring();
  AnnotatedRelation out(q.head_vars.size(), s);
  if (iq.empty) return out;
  Tuple head(q.head_vars.size());
  std::vector<Datum> ivals(iq.bounds.size(), 1);
  rel.for_each([&](std::span<const Datum> t, Value v) {
    std::fill(ivals.begin(), ivals.end(), 1);
    for (;;) {
      for (std::size_t i = 0; i < head.size(); ++i) {
        const auto& name = q.head_vars[i];
        auto it = std::find(rel_free.begin(), rel_free.end(), name);
        if (it != rel_free.end()) {
          head[i] = t[it - rel_free.begin()];
        } else {
          auto jt = std::find(iq.free_vars.begin(), iq.free_vars.end(), name);
          head[i] = ivals[jt - iq.free_vars.begin()];
        }
      }
      out.set(head, s.mul(v, iq.k));
      std::size_t i = ivals.size();
      while (i-- > 0) {
        if (ivals[i] < iq.bounds[i]) {
          ++ivals[i];
          break;
        }
        ivals[i] = 1;
      }
      if (i == static_cast<std::size_t>(-1)) break;
    }
  });
  return out;
}

}  // namespace deltaenum
