#include "deltaenum/engine_dynamic.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "deltaenum/errors.hpp"
#include "deltaenum/planner.hpp"
#include "engine_core.hpp"

namespace deltaenum {

struct DynamicState::Impl {
  Impl(const ConjunctiveQuery& q, const Database& source) : db(source) {
    const Semiring& s = db.semiring();
    if (!s.zero_divisor_free())
      throw CapabilityError("semiring '" + std::string(s.name()) + "' has zero divisors");
    if (!s.sum_maintainable())
      throw CapabilityError("semiring '" + std::string(s.name()) + "' is not sum-maintainable");
    q.validate();
    auto plan = build_guarded_plan(q);
    if (!plan) throw ClassificationError("query is not q-hierarchical: " + to_string(q));
    QuerySplit sp = split(q);
    state = std::make_shared<EnumerationState>(q, sp, std::move(*plan), db);
    core = &state->core;
    core->dynamic = true;
    for (std::size_t x = 0; x < core->plan.nodes.size(); ++x)
      if (core->plan.nodes[x].is_leaf()) leaves_of[core->leaves[x].relation].push_back(static_cast<int>(x));
    for (const auto& [name, rel] : db.relations()) {
      if (!leaves_of.count(name)) continue;
      rel.for_each([&](std::span<const Datum> t, Value v) { feed_leaves(name, t, v); });
    }
  }

  Database db;
  std::shared_ptr<EnumerationState> state;
  PlanCore* core = nullptr;
  std::map<std::string, std::vector<int>> leaves_of;
  std::vector<Datum> scratch, key;

  void feed_leaves(const std::string& relation, std::span<const Datum> t, Value v) {
    auto it = leaves_of.find(relation);
    if (it == leaves_of.end()) return;
    std::optional<Value> nv;
    if (!core->semiring.is_zero(v)) nv = v;
    for (int x : it->second) {
      if (!core->leaf_key(x, t, scratch, key)) continue;
      Tuple k = key;
      change(x, k, nv);
    }
  }

  /** Sets node x's entry for key to v (absent when empty) and propagates upward. */
  void change(int x, const Tuple& k, std::optional<Value> v) {
    NodeStore& st = core->nodes[x];
    std::uint32_t id = st.table.find(k);
    bool had = id != TupleTable::npos;
    if (!had && !v) return;
    std::optional<Value> old;
    if (had && st.mode != NodeMode::Sup) old = st.ann[id];
    if (st.mode == NodeMode::Sup) {
      if (had == static_cast<bool>(v)) return;
    } else if (had && v && *old == *v) {
      return;
    }
    int p = core->plan.nodes[x].parent;
    if (v) {
      if (!had) {
        id = st.table.insert(k).first;
        st.grow_arrays();
        if (st.mode == NodeMode::Sup) st.ext[id].clear();
      }
      if (st.mode != NodeMode::Sup) st.ann[id] = *v;
      if (p >= 0) notify(p, x, id, k, old, v);
    } else {
      if (p >= 0) notify(p, x, id, k, old, v);
      if (st.mode == NodeMode::Sup) st.ext[id].clear();
      st.table.erase(id);
    }
  }

  /**
   * Child c's entry cid (key ck) changed from old to v. For support children
   * only presence matters. Runs before a removed child entry is erased.
   */
  void notify(int p, int c, std::uint32_t cid, const Tuple& ck, std::optional<Value> old, std::optional<Value> v) {
    NodeStore& ps = core->nodes[p];
    NodeStore& cs = core->nodes[c];
    const PlanNode& pn = core->plan.nodes[p];
    const Semiring& s = core->semiring;
    Tuple pk(cs.to_parent.size());
    for (std::size_t i = 0; i < pk.size(); ++i) pk[i] = ck[cs.to_parent[i]];
    bool child_sup = cs.mode == NodeMode::Sup;

    if (pn.children.size() == 1) {
      if (ps.mode == NodeMode::Sup) {
        bool was = child_sup ? !v : static_cast<bool>(old);
        bool now = static_cast<bool>(v);
        if (was == now) return;
        if (now) {
          change(p, pk, s.one());
          std::uint32_t pid = ps.table.find(pk);
          cs.ext_pos[cid] = static_cast<std::uint32_t>(ps.ext[pid].size());
          ps.ext[pid].push_back(cid);
        } else {
          std::uint32_t pid = ps.table.find(pk);
          auto& list = ps.ext[pid];
          std::uint32_t pos = cs.ext_pos[cid];
          list[pos] = list.back();
          cs.ext_pos[list[pos]] = pos;
          list.pop_back();
          if (list.empty()) change(p, pk, std::nullopt);
        }
        return;
      }
      auto [aid, fresh] = ps.acc_keys.insert(pk);
      if (aid >= ps.accs.size())
        ps.accs.resize(aid + 1, acc_new(s));
      if (fresh) ps.accs[aid] = acc_new(s);
      SumAccumulator& acc = ps.accs[aid];
      if (old) acc_delete(acc, *old);
      if (v) acc_insert(acc, *v);
      Value total = acc.total();
      if (acc.empty()) ps.acc_keys.erase(aid);
      change(p, pk, s.is_zero(total) ? std::nullopt : std::optional<Value>(total));
      return;
    }

    // two children over the same variables
    bool first = pn.children[0] == c;
    int sib = pn.children[first ? 1 : 0];
    NodeStore& ss = core->nodes[sib];
    std::uint32_t sid = ss.table.find(pk);
    bool now = v && sid != TupleTable::npos;
    if (ps.mode == NodeMode::Sup) {
      if (!now) {
        change(p, pk, std::nullopt);
        return;
      }
      change(p, pk, s.one());
      std::uint32_t pid = ps.table.find(pk);
      ps.ptr1[pid] = first ? cid : sid;
      ps.ptr2[pid] = first ? sid : cid;
      return;
    }
    if (!now) {
      change(p, pk, std::nullopt);
      return;
    }
    Value prod = first ? s.mul(*v, ss.ann[sid]) : s.mul(ss.ann[sid], *v);
    change(p, pk, prod);
  }
};

DynamicState::DynamicState(const ConjunctiveQuery& q, const Database& db) : impl_(std::make_unique<Impl>(q, db)) {}
DynamicState::~DynamicState() = default;
DynamicState::DynamicState(DynamicState&&) noexcept = default;
DynamicState& DynamicState::operator=(DynamicState&&) noexcept = default;

void DynamicState::update(const SingleTupleUpdate& u) {
  Impl& m = *impl_;
  const Semiring& s = m.db.semiring();
  Value old = apply_update(m.db, u);
  Value now = u.kind == SingleTupleUpdate::Kind::Insert ? s.add(old, u.value) : s.zero();
  m.feed_leaves(u.relation, u.tuple, now);
}

Enumerator DynamicState::enumerate() const { return Enumerator(impl_->state); }

AnnotatedRelation DynamicState::materialize() const {
  AnnotatedRelation out(impl_->state->query.head_vars.size(), impl_->db.semiring());
  Enumerator e = enumerate();
  while (e.next()) out.set(e.tuple(), e.annotation());
  return out;
}

const Database& DynamicState::database() const { return impl_->db; }
const QueryPlan& DynamicState::plan() const { return impl_->core->plan; }
const EnumerationState& DynamicState::state() const { return *impl_->state; }

std::vector<std::pair<Tuple, Value>> DynamicState::accumulator_totals(int node) const {
  const NodeStore& st = impl_->core->nodes.at(node);
  std::vector<std::pair<Tuple, Value>> out;
  for (std::uint32_t id : st.acc_keys.live()) {
    auto t = st.acc_keys.tuple(id);
    out.emplace_back(Tuple(t.begin(), t.end()), st.accs[id].total());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::size_t DynamicState::accumulator_count() const {
  std::size_t n = 0;
  for (const auto& st : impl_->core->nodes) n += st.acc_keys.size();
  return n;
}

std::vector<std::string> DynamicState::check() const {
  std::vector<std::string> bad = impl_->core->check();
  // leaves against the current database
  const PlanCore& core = *impl_->core;
  std::vector<Datum> scratch, key;
  for (std::size_t x = 0; x < core.plan.nodes.size(); ++x) {
    if (!core.plan.nodes[x].is_leaf()) continue;
    const NodeStore& st = core.nodes[x];
    std::size_t expected = 0;
    impl_->db.relation(core.leaves[x].relation).for_each([&](std::span<const Datum> t, Value v) {
      if (!core.leaf_key(static_cast<int>(x), t, scratch, key)) return;
      ++expected;
      std::uint32_t id = st.table.find(key);
      if (id == TupleTable::npos || !(st.ann[id] == v))
        bad.push_back("leaf " + std::to_string(x) + ": differs from its relation");
    });
    if (expected != st.table.size()) bad.push_back("leaf " + std::to_string(x) + ": stale tuples");
  }
  return bad;
}

DynamicState dyn_preprocess(const ConjunctiveQuery& q, const Database& db) { return DynamicState(q, db); }
void dyn_update(DynamicState& state, const SingleTupleUpdate& u) { state.update(u); }
Enumerator dyn_enumerate(const DynamicState& state) { return state.enumerate(); }

}  // namespace deltaenum
