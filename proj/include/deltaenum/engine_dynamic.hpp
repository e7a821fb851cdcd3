#pragma once

#include <memory>
#include <string>
#include <vector>

#include "deltaenum/engine_static.hpp"
#include "deltaenum/kdata.hpp"
#include "deltaenum/query.hpp"

namespace deltaenum {

/**
 * Enumeration structure for a q-hierarchical CQ kept current under
 * single-tuple updates. Owns its copy of the database. Any update
 * invalidates running enumerators.
 */
class DynamicState {
 public:
  /** Throws ClassificationError unless q is q-hierarchical, CapabilityError unless the semiring is sum-maintainable. */
  DynamicState(const ConjunctiveQuery& q, const Database& db);
  ~DynamicState();
  DynamicState(DynamicState&&) noexcept;
  DynamicState& operator=(DynamicState&&) noexcept;

  void update(const SingleTupleUpdate& u);
  Enumerator enumerate() const;
  AnnotatedRelation materialize() const;

  const Database& database() const;
  const QueryPlan& plan() const;
  const EnumerationState& state() const;
  /** Accumulator totals of a projection node, sorted by key. */
  std::vector<std::pair<Tuple, Value>> accumulator_totals(int node) const;
  std::size_t accumulator_count() const;
  /** Node and accumulator invariants; empty when all hold. */
  std::vector<std::string> check() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

DynamicState dyn_preprocess(const ConjunctiveQuery& q, const Database& db);
void dyn_update(DynamicState& state, const SingleTupleUpdate& u);
Enumerator dyn_enumerate(const DynamicState& state);

}  // namespace deltaenum
