#pragma once

#include <optional>
#include <string>
#include <vector>

namespace deltaenum {

struct RelAtom {
  std::string relation;
  std::vector<std::string> vars;  // repetitions allowed
  friend bool operator==(const RelAtom&, const RelAtom&) = default;
};

/** x <= c with c a constant symbol ("1" is the reserved constant). */
struct IneqAtom {
  std::string var;
  std::string constant;
  friend bool operator==(const IneqAtom&, const IneqAtom&) = default;
};

/** Positive first-order formula. */
struct FoFormula {
  enum class Kind { Rel, Ineq, And, Or, Exists };
  Kind kind = Kind::And;
  RelAtom rel;                     // Rel
  IneqAtom ineq;                   // Ineq
  std::vector<FoFormula> children; // And/Or: operands; Exists: one body
  std::vector<std::string> vars;   // Exists: quantified variables

  static FoFormula atom(RelAtom a);
  static FoFormula comparison(IneqAtom a);
  static FoFormula conj(std::vector<FoFormula> parts);
  static FoFormula disj(std::vector<FoFormula> parts);
  static FoFormula exists(std::vector<std::string> vars, FoFormula body);

  /** Free variables in first-occurrence order. */
  std::vector<std::string> free_vars() const;
  bool has_disjunction() const;
};

/** FO+ query H(x̄) <- φ. */
struct FoQuery {
  std::string head;
  std::vector<std::string> head_vars;
  FoFormula body;
};

/** H(x̄) <- ∃ȳ. a1 ∧ ... ∧ an. */
struct ConjunctiveQuery {
  std::string head = "H";
  std::vector<std::string> head_vars;
  std::vector<std::string> bound_vars;  // first-occurrence order
  std::vector<RelAtom> atoms;
  std::vector<IneqAtom> ineqs;

  /** Distinct head variables in head order. */
  std::vector<std::string> free_vars() const;
  /** Every variable, free ones first (head order), then bound ones. */
  std::vector<std::string> all_vars() const;
  bool is_free(const std::string& v) const;
  /** Recomputes bound_vars from the body, in first-occurrence order. */
  void normalize_bound();
  /** Throws Error when the variable bookkeeping is inconsistent. */
  void validate() const;
  FoQuery to_fo() const;
};

/** Parses `H(x,y) :- R(x,z), S(z,y), x <= c.`; throws NotConjunctiveError on `;`. */
ConjunctiveQuery parse_query(const std::string& text);
/** Parses the same syntax with `;` disjunction and parentheses. */
FoQuery parse_formula(const std::string& text);

std::string to_string(const ConjunctiveQuery& q);
std::string to_string(const FoFormula& f);
std::string to_string(const FoQuery& q);

struct QuerySplit {
  ConjunctiveQuery rel_part;
  ConjunctiveQuery ineq_part;
  /** covered[i] = indices into the query's ineqs covered by atom i. */
  std::vector<std::vector<std::size_t>> covered;
  /** Indices of the original ineqs that form ineq_part (empty for the canonical true query). */
  std::vector<std::size_t> uncovered;
};

QuerySplit split(const ConjunctiveQuery& q);

struct ConstantDisjointness {
  bool ok = true;
  std::string reason;
  /** Offending inequalities as indices into q.ineqs (one or two entries). */
  std::vector<std::size_t> witness;
};

ConstantDisjointness is_constant_disjoint(const ConjunctiveQuery& q);
bool has_self_join(const ConjunctiveQuery& q);

}  // namespace deltaenum
