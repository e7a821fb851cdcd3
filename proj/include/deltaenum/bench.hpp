#pragma once

#include <cstdint>
#include <vector>

#include "deltaenum/generators.hpp"
#include "deltaenum/kdata.hpp"
#include "deltaenum/query.hpp"

namespace deltaenum {

/**
 * Random database for the relation symbols of q holding about `tuples`
 * tuples in total, split evenly over the atoms. Values are drawn from
 * 1..max(2, tuples / 4) so joins stay selective and outputs grow linearly.
 */
Database scaled_database(Rng& rng, const ConjunctiveQuery& q, std::size_t tuples, const Semiring& s);

/** Alternating deletes of existing tuples and inserts of fresh ones; the db size stays put. */
std::vector<SingleTupleUpdate> balanced_updates(Rng& rng, const Database& db, std::size_t count,
                                                const std::vector<std::string>& relations);

struct StaticBenchResult {
  double preprocess_seconds = 0;
  double enumerate_seconds = 0;
  std::size_t outputs = 0;
  std::uint64_t max_gap_ns = 0;  // largest gap between consecutive outputs, first output excluded
  std::vector<std::uint64_t> gap_histogram;  // bucket b counts gaps in [2^b, 2^(b+1)) ns
};

/** Preprocess then drain one enumerator, timestamping every output. */
StaticBenchResult bench_static(const ConjunctiveQuery& q, const Database& db);

struct DynamicBenchResult {
  double preprocess_seconds = 0;
  std::size_t updates = 0;
  double mean_update_ns = 0;
  std::uint64_t max_update_ns = 0;
};

DynamicBenchResult bench_dynamic(const ConjunctiveQuery& q, const Database& db,
                                 const std::vector<SingleTupleUpdate>& updates);

/** Least-squares slope of log(y) against log(x). */
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);
double median(std::vector<double> v);

}  // namespace deltaenum
