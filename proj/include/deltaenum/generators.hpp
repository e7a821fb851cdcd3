#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "deltaenum/kdata.hpp"
#include "deltaenum/matlang.hpp"
#include "deltaenum/query.hpp"

namespace deltaenum {

using Rng = std::mt19937_64;

/** DELTA_ENUM_SEED if set, otherwise `fallback`. */
std::uint64_t seed_from_env(std::uint64_t fallback);

struct QueryGenOptions {
  std::size_t max_atoms = 4;
  std::size_t max_vars = 6;
  std::size_t relations = 3;  // R1..Rn
  std::size_t max_arity = 3;
  double ineq_prob = 0.5;
  std::size_t constants = 2;  // c1..cn besides "1"
};

/** Vocabulary with relations R1..Rn of random arity and constants c1..cn valued in 1..domain. */
Vocabulary random_vocabulary(Rng& rng, const QueryGenOptions& o, Datum domain);

ConjunctiveQuery random_cq(Rng& rng, const Vocabulary& v, const QueryGenOptions& o);
ConjunctiveQuery random_free_connex_cq(Rng& rng, const Vocabulary& v, const QueryGenOptions& o);
/** Built from a random variable forest; always q-hierarchical. */
ConjunctiveQuery random_q_hierarchical_cq(Rng& rng, const Vocabulary& v, const QueryGenOptions& o);

struct DbGenOptions {
  Datum domain = 5;
  std::size_t max_tuples = 30;
};

/** Random annotation: natural 1..5, boolean true, real a nonzero multiple of 1/4 in [-2,2]. */
Value random_value(Rng& rng, const Semiring& s);
Database random_database(Rng& rng, const Vocabulary& v, const Semiring& s, const DbGenOptions& o);

/** Mix of inserts (fresh or existing tuples) and deletes of existing tuples; db is only read. */
std::vector<SingleTupleUpdate> random_updates(Rng& rng, const Database& db, std::size_t count, Datum domain,
                                              const std::vector<std::string>& relations = {});

/** Sizes alpha/beta/gamma valued in 1..max_dim and a handful of matrix, vector and scalar symbols. */
MatrixSchema random_matrix_schema(Rng& rng, Datum max_dim, bool unary_vectors);
/** Well-typed expression without addition. */
ExprPtr random_conj_matlang(Rng& rng, const MatrixSchema& schema, int depth);
MatrixInstance random_matrix_instance(Rng& rng, const MatrixSchema& schema, const Semiring& s, double density);

}  // namespace deltaenum
