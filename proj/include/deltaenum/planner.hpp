#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deltaenum/query.hpp"

namespace deltaenum {

/** Undirected tree over hyperedge indices. */
struct JoinTree {
  std::size_t size = 0;
  std::vector<std::pair<int, int>> edges;
};

/** GYO ear removal over arbitrary hyperedges (variable name sets). */
std::optional<JoinTree> build_join_tree(const std::vector<std::vector<std::string>>& hyperedges);
std::optional<JoinTree> build_join_tree(const std::vector<RelAtom>& atoms);

/** True iff every variable's nodes form a connected subtree. */
bool is_join_tree(const JoinTree& t, const std::vector<std::vector<std::string>>& hyperedges);

struct Classification {
  bool acyclic = false;
  bool free_connex = false;
  bool q_hierarchical = false;
  bool constant_disjoint = false;
  bool self_join_free = false;
  std::string constant_disjoint_reason;
};

bool is_acyclic(const ConjunctiveQuery& q);
/** Decided on the relational part: acyclic with and without the head atom. */
bool is_free_connex(const ConjunctiveQuery& q);
/** Both containment conditions over relational atoms. */
bool is_q_hierarchical(const ConjunctiveQuery& q);
Classification classify(const ConjunctiveQuery& q);

/** Width-1 generalized hypertree decomposition with a connex node set. */
struct Ghd {
  struct Node {
    std::vector<std::string> bag;
    int cover = -1;  // relational atom index
    int parent = -1;
    std::vector<int> children;
    bool connex = false;
  };
  std::vector<Node> nodes;
  int root = -1;

  std::size_t connex_size() const;
};

/**
 * Complete free-connex width-1 GHD of the relational atoms of q, or none if
 * q is not free-connex. Inequality atoms are ignored.
 */
std::optional<Ghd> build_fc_ghd(const ConjunctiveQuery& q);

/** Lists violated GHD invariants (empty when valid). */
std::vector<std::string> check_ghd(const Ghd& h, const ConjunctiveQuery& q);

struct PlanNode {
  std::vector<int> vars;  // sorted variable ids
  int atom = -1;          // >= 0 for leaves
  bool filter = false;    // leaf holding only the support projection of its atom
  int parent = -1;
  std::vector<int> children;
  bool connex = false;

  bool is_leaf() const { return atom >= 0; }
};

/** Binary generalized join tree with a sibling-closed connex set. */
struct QueryPlan {
  std::vector<std::string> var_names;  // id -> name
  std::vector<RelAtom> atoms;          // relational atoms of the query
  std::vector<std::string> free_vars;  // free variables occurring in atoms
  std::vector<PlanNode> nodes;
  int root = -1;                       // -1 when there are no relational atoms
  bool guarded = false;

  int var_id(const std::string& name) const;
  /** Connex nodes without connex children. */
  std::vector<int> frontier() const;
  /** Nodes in post-order (children before parents). */
  std::vector<int> post_order() const;
};

/** Builds the normalized plan for a GHD produced by build_fc_ghd. */
QueryPlan ghd_to_plan(const Ghd& h, const ConjunctiveQuery& q);
/** build_fc_ghd followed by ghd_to_plan. */
std::optional<QueryPlan> build_fc_plan(const ConjunctiveQuery& q);
/** Guarded normalized plan from the variable hierarchy, or none if q is not q-hierarchical. */
std::optional<QueryPlan> build_guarded_plan(const ConjunctiveQuery& q);

/** Lists violated plan invariants (empty when valid). */
std::vector<std::string> check_plan(const QueryPlan& p, const ConjunctiveQuery& q);

nlohmann::json plan_to_json(const QueryPlan& p);
std::string plan_to_dot(const QueryPlan& p);
nlohmann::json ghd_to_json(const Ghd& h);

}  // namespace deltaenum
