#pragma once

// Shared node storage and connex enumeration for the static and dynamic engines.

#include <string>
#include <vector>

#include "deltaenum/engine_static.hpp"
#include "deltaenum/kdata.hpp"
#include "deltaenum/planner.hpp"
#include "deltaenum/semiring.hpp"
#include "deltaenum/tuple_table.hpp"

namespace deltaenum {

enum class NodeMode { Leaf, Agg, Sup };

/** How a leaf pulls tuples out of its base relation. */
struct LeafSpec {
  std::string relation;
  std::size_t arity = 0;
  std::vector<int> slot_of_pos;  // atom position -> slot in the distinct-variable tuple
  std::size_t distinct = 0;
  std::vector<std::pair<int, Datum>> checks;  // (slot, bound): covered inequalities
  std::vector<int> project;  // node slot -> distinct slot
};

struct NodeStore {
  NodeMode mode = NodeMode::Agg;
  TupleTable table;
  std::vector<Value> ann;  // Leaf and Agg nodes
  // Sup nodes with one child: parent entry -> child entry ids
  std::vector<std::vector<std::uint32_t>> ext;
  // Sup nodes with two children: child entry ids
  std::vector<std::uint32_t> ptr1, ptr2;
  // position of each own entry inside the parent's ext list (parent is a Sup projection)
  std::vector<std::uint32_t> ext_pos;
  // own slot for each parent variable
  std::vector<int> to_parent;
  // own slot for each variable of the second child (2-child nodes)
  std::vector<int> to_second;
  // dynamic aggregation tables, keyed like the own table
  TupleTable acc_keys;
  std::vector<SumAccumulator> accs;

  void grow_arrays();
};

/** Per-plan storage plus the precomputed enumeration schedule. */
struct PlanCore {
  PlanCore(QueryPlan plan, const ConjunctiveQuery& q, const QuerySplit& sp, const Database& db);

  QueryPlan plan;
  Semiring semiring;
  std::vector<NodeStore> nodes;
  std::vector<LeafSpec> leaves;  // indexed by node id (empty for interior nodes)

  struct Step {
    int node;
    enum class Kind { Root, Choice, First, Second } kind;
    int parent;  // node whose entry determines this one
  };
  std::vector<Step> schedule;  // connex nodes in pre-order
  std::vector<int> frontier;
  std::vector<std::pair<int, int>> free_source;  // per plan free var: (node, slot)
  bool dynamic = false;  // accumulators are maintained

  /** Leaf tuple for a base tuple, or false if the tuple does not match / is filtered out. */
  bool leaf_key(int node, std::span<const Datum> base, std::vector<Datum>& scratch, std::vector<Datum>& key) const;

  void build_static(const Database& db);
  std::vector<std::string> check() const;
  /** Stored tuples of a node in lexicographic order (support nodes report one). */
  std::vector<std::pair<Tuple, Value>> entries(int node) const;
  Value semantic_value(int node, std::uint32_t id) const;
};

/** Walks the connex subtree; each position is one valuation of the plan's free variables. */
class ConnexCursor {
 public:
  explicit ConnexCursor(const PlanCore& core);
  bool start();
  bool advance();
  Value annotation() const;
  /** Values of plan.free_vars at the current position. */
  void read(std::vector<Datum>& out) const;

 private:
  void settle(std::size_t from);
  const std::vector<std::uint32_t>& choices(std::size_t step) const;

  const PlanCore& core_;
  std::vector<std::uint32_t> entry_;  // per node
  std::vector<std::size_t> pos_;      // per schedule step
  bool empty_plan_;
  bool done_ = false;
};

struct EnumerationState {
  EnumerationState(const ConjunctiveQuery& q, const QuerySplit& sp, QueryPlan plan, const Database& db);

  ConjunctiveQuery query;
  QuerySplit split;
  PlanCore core;
  IneqPlanState ineq;
  // head position -> (0 = relational free var, 1 = inequality free var, index)
  std::vector<std::pair<int, int>> head_source;

  void refresh_ineq(const Database& db);
};

}  // namespace deltaenum
