#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "deltaenum/kdata.hpp"
#include "deltaenum/planner.hpp"
#include "deltaenum/query.hpp"

namespace deltaenum {

/** Ranges of the free variables of the inequality part and its constant annotation. */
struct IneqPlanState {
  std::vector<std::string> free_vars;
  std::vector<Datum> bounds;  // free_vars[i] ranges over 1..bounds[i]
  Value k;                    // sum of one over all bound-variable valuations
  bool empty = false;         // k is zero: no output at all
};

IneqPlanState plan_inequalities(const ConjunctiveQuery& ineq_part, const Database& db);

/**
 * Drops every tuple that matches some atom of q but violates an inequality
 * covered by that atom. Relations q does not mention are copied unchanged.
 */
Database atomically_reduce(const Database& db, const ConjunctiveQuery& q);

struct EnumerationState;

/**
 * Linear-time preprocessing for a free-connex CQ. Throws ClassificationError
 * for other queries and CapabilityError for semirings with zero divisors.
 */
std::shared_ptr<const EnumerationState> preprocess(const ConjunctiveQuery& q, const Database& db);

const QueryPlan& state_plan(const EnumerationState& s);
const IneqPlanState& state_ineq(const EnumerationState& s);
const ConjunctiveQuery& state_query(const EnumerationState& s);
/** Number of tuples stored at each plan node. */
std::vector<std::size_t> state_node_sizes(const EnumerationState& s);
/** Stored tuples of one plan node, sorted; support-only nodes report one. */
std::vector<std::pair<Tuple, Value>> state_node_entries(const EnumerationState& s, int node);
/** Checks the stored node relations against their defining equations. */
std::vector<std::string> check_state(const EnumerationState& s);

/**
 * Cursor over AnsEnum: head tuples with nonzero annotations, each once.
 * Any number of cursors may run over one state concurrently.
 */
class Enumerator {
 public:
  explicit Enumerator(std::shared_ptr<const EnumerationState> state);
  ~Enumerator();
  Enumerator(Enumerator&&) noexcept;
  Enumerator& operator=(Enumerator&&) noexcept;

  /** Advances to the next output; false once exhausted. */
  bool next();
  const Tuple& tuple() const;
  Value annotation() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/** Full result: preprocess followed by draining the enumerator. */
AnnotatedRelation eval_materialized(const ConjunctiveQuery& q, const Database& db);

/**
 * Evaluates any CQ by an indexed backtracking join over the relational atoms
 * (no delay guarantee). Used for queries that are not free-connex.
 */
AnnotatedRelation eval_general(const ConjunctiveQuery& q, const Database& db);

}  // namespace deltaenum
