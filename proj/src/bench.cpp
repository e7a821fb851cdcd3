#include "deltaenum/bench.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

#include "deltaenum/engine_dynamic.hpp"
#include "deltaenum/engine_static.hpp"
#include "deltaenum/errors.hpp"

namespace deltaenum {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t ns_since(Clock::time_point a, Clock::time_point b) {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
}

double seconds(Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double>(b - a).count(); }

Datum draw(Rng& rng, Datum hi) { return std::uniform_int_distribution<Datum>(1, hi)(rng); }

}  // namespace

Database scaled_database(Rng& rng, const ConjunctiveQuery& q, std::size_t tuples, const Semiring& s) {
  Vocabulary v;
  for (const auto& a : q.atoms) v.relations[a.relation] = a.vars.size();
  Datum domain = std::max<Datum>(2, tuples / 4);
  v.constants["1"] = 1;
  for (const auto& c : q.ineqs)
    if (c.constant != "1") v.constants[c.constant] = std::max<Datum>(1, domain / 2);
  Database db(v, s);
  if (v.relations.empty()) return db;
  std::size_t per = std::max<std::size_t>(1, tuples / v.relations.size());
  for (const auto& [name, arity] : v.relations) {
    auto& rel = db.relation(name);
    Tuple t(arity);
    // bounded attempts: tiny domains cannot hold `per` distinct tuples
    for (std::size_t tries = 0; rel.size() < per && tries < 4 * per; ++tries) {
      for (auto& d : t) d = draw(rng, domain);
      if (!rel.contains(t)) rel.set(t, random_value(rng, s));
    }
  }
  return db;
}

std::vector<SingleTupleUpdate> balanced_updates(Rng& rng, const Database& db, std::size_t count,
                                                const std::vector<std::string>& relations) {
  if (relations.empty()) throw ConfigError("balanced_updates needs at least one relation");
  // live tuples per relation, kept as a swap-remove pool
  std::map<std::string, std::vector<Tuple>> pool;
  std::map<std::string, std::set<Tuple>> present;
  Datum domain = 2;
  for (const auto& r : relations) {
    auto& p = pool[r];
    db.relation(r).for_each([&](std::span<const Datum> t, Value) {
      p.emplace_back(t.begin(), t.end());
      for (Datum d : t) domain = std::max(domain, d);
    });
    present[r] = {p.begin(), p.end()};
  }
  std::vector<SingleTupleUpdate> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string& r = relations[std::uniform_int_distribution<std::size_t>(0, relations.size() - 1)(rng)];
    auto& p = pool[r];
    auto& live = present[r];
    if (i % 2 == 0 && !p.empty()) {
      std::size_t k = std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng);
      out.push_back(SingleTupleUpdate::erase(r, p[k]));
      live.erase(p[k]);
      p[k] = p.back();
      p.pop_back();
    } else {
      Tuple t(db.relation(r).arity());
      // wide enough that at least half of the unary candidates are free
      Datum hi = std::max<Datum>(domain, 2 * live.size() + 2);
      do {
        for (auto& d : t) d = draw(rng, hi);
      } while (live.count(t));
      out.push_back(SingleTupleUpdate::insert(r, t, random_value(rng, db.semiring())));
      live.insert(t);
      p.push_back(t);
    }
  }
  return out;
}

StaticBenchResult bench_static(const ConjunctiveQuery& q, const Database& db) {
  StaticBenchResult r;
  r.gap_histogram.assign(64, 0);
  auto t0 = Clock::now();
  auto state = preprocess(q, db);
  auto t1 = Clock::now();
  r.preprocess_seconds = seconds(t0, t1);
  Enumerator e(state);
  Clock::time_point prev = Clock::now(), start = prev;
  while (e.next()) {
    auto now = Clock::now();
    if (r.outputs > 0) {
      std::uint64_t gap = ns_since(prev, now);
      r.max_gap_ns = std::max(r.max_gap_ns, gap);
      ++r.gap_histogram[gap == 0 ? 0 : std::bit_width(gap) - 1];
    }
    prev = now;
    ++r.outputs;
  }
  r.enumerate_seconds = seconds(start, Clock::now());
  while (r.gap_histogram.size() > 1 && r.gap_histogram.back() == 0) r.gap_histogram.pop_back();
  return r;
}

DynamicBenchResult bench_dynamic(const ConjunctiveQuery& q, const Database& db,
                                 const std::vector<SingleTupleUpdate>& updates) {
  DynamicBenchResult r;
  auto t0 = Clock::now();
  DynamicState st(q, db);
  auto t1 = Clock::now();
  r.preprocess_seconds = seconds(t0, t1);
  std::uint64_t total = 0;
  for (const auto& u : updates) {
    auto a = Clock::now();
    st.update(u);
    std::uint64_t d = ns_since(a, Clock::now());
    total += d;
    r.max_update_ns = std::max(r.max_update_ns, d);
  }
  r.updates = updates.size();
  r.mean_update_ns = updates.empty() ? 0 : static_cast<double>(total) / static_cast<double>(updates.size());
  return r;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::size_t n = std::min(x.size(), y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  double den = n * sxx - sx * sx;
  return den == 0 ? 0 : (n * sxy - sx * sy) / den;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
}

}  // namespace deltaenum
