#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deltaenum/kdata.hpp"
#include "deltaenum/matlang.hpp"
#include "deltaenum/query.hpp"

namespace deltaenum {

// Brute-force reference evaluators. Exponential in the number of variables.

/** Largest data value or constant of db (at least 1). */
Datum default_domain_bound(const Database& db);

/**
 * Semiring semantics of phi over the domain {1..D}: nonzero valuations of
 * `order` (default: phi's free variables) with their values.
 */
AnnotatedRelation oracle_eval_fo(const FoFormula& phi, const Database& db, Datum domain,
                                 const std::vector<std::string>& order);
AnnotatedRelation oracle_eval_fo(const FoFormula& phi, const Database& db, std::optional<Datum> domain = std::nullopt);

/** Head tuples of an FO+ query (repeated head variables allowed). */
AnnotatedRelation oracle_eval_query(const FoQuery& q, const Database& db, std::optional<Datum> domain = std::nullopt);
AnnotatedRelation oracle_eval_cq(const ConjunctiveQuery& q, const Database& db,
                                 std::optional<Datum> domain = std::nullopt);

struct DenseMatrix {
  Datum rows = 0;
  Datum cols = 0;
  std::vector<Value> data;  // row-major

  Value at(Datum i, Datum j) const { return data[(i - 1) * cols + (j - 1)]; }
  Value& at(Datum i, Datum j) { return data[(i - 1) * cols + (j - 1)]; }
};

DenseMatrix oracle_eval_matlang(const Expr& e, const MatrixInstance& inst);
SparseMatrix to_sparse(const DenseMatrix& m, const Semiring& s);

}  // namespace deltaenum
