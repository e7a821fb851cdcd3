#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "deltaenum/errors.hpp"
#include "deltaenum/semiring.hpp"

using namespace deltaenum;

namespace {

Value nat(std::uint64_t n) { return Value::natural(n); }
Value real(double d) { return Value::real(d); }

std::vector<Value> samples(const Semiring& s, std::mt19937_64& rng, int n) {
  std::vector<Value> out{s.zero(), s.one()};
  std::uniform_int_distribution<int> d(0, 20);
  for (int i = 0; i < n; ++i) {
    switch (s.kind()) {
      case SemiringKind::Boolean: out.push_back(Value::boolean(d(rng) % 2)); break;
      case SemiringKind::Natural: out.push_back(nat(d(rng))); break;
      case SemiringKind::Real: out.push_back(real((d(rng) - 10) / 4.0)); break;
      case SemiringKind::TropicalMin:
        out.push_back(d(rng) == 0 ? s.zero() : real(d(rng)));
        break;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("builtin constants and flags") {
  auto b = builtin_semiring("boolean");
  auto n = builtin_semiring("natural");
  auto r = builtin_semiring("real");
  auto t = builtin_semiring("tropical-min");
  CHECK(b.add(b.one(), b.one()) == b.one());
  CHECK(n.add(n.mul(nat(2), nat(3)), n.mul(nat(1), nat(1))) == nat(7));
  CHECK(t.is_zero(t.mul(t.zero(), real(5))));
  CHECK(std::isinf(t.zero().as_real()));
  CHECK(t.one().as_real() == 0.0);
  for (const auto& s : {b, n, r, t}) {
    CHECK(s.zero_divisor_free());
    CHECK_FALSE(s.zero() == s.one());
  }
  CHECK(b.zero_sum_free());
  CHECK(n.zero_sum_free());
  CHECK_FALSE(r.zero_sum_free());
  CHECK(t.zero_sum_free());
  CHECK(b.sum_maintainable());
  CHECK(n.sum_maintainable());
  CHECK(r.sum_maintainable());
  CHECK_FALSE(t.sum_maintainable());
  CHECK_THROWS_AS(builtin_semiring("complex"), ConfigError);
}

TEST_CASE("axioms on sampled triples") {
  std::mt19937_64 rng(7);
  for (const char* name : {"boolean", "natural", "real", "tropical-min"}) {
    auto s = builtin_semiring(name);
    auto v = samples(s, rng, 40);
    std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
    auto eq = [&](Value a, Value b) { return s.approx_equal(a, b, 1e-9); };
    for (int i = 0; i < 2000; ++i) {
      Value a = v[pick(rng)], b = v[pick(rng)], c = v[pick(rng)];
      CHECK(eq(s.add(s.add(a, b), c), s.add(a, s.add(b, c))));
      CHECK(eq(s.mul(s.mul(a, b), c), s.mul(a, s.mul(b, c))));
      CHECK(eq(s.add(a, b), s.add(b, a)));
      CHECK(eq(s.mul(a, b), s.mul(b, a)));
      CHECK(eq(s.add(a, s.zero()), a));
      CHECK(eq(s.mul(a, s.one()), a));
      CHECK(eq(s.mul(a, s.add(b, c)), s.add(s.mul(a, b), s.mul(a, c))));
      CHECK(s.is_zero(s.mul(s.zero(), a)));
      if (s.is_zero(s.mul(a, b))) CHECK((s.is_zero(a) || s.is_zero(b)));
      if (s.zero_sum_free() && s.is_zero(s.add(a, b))) CHECK((s.is_zero(a) && s.is_zero(b)));
    }
  }
}

TEST_CASE("accumulator examples") {
  auto n = builtin_semiring("natural");
  auto b = builtin_semiring("boolean");
  auto r = builtin_semiring("real");
  CHECK(acc_new(n).total() == nat(0));
  CHECK(b.is_zero(acc_new(b).total()));
  CHECK(acc_new(r).total() == real(0.0));
  CHECK_THROWS_AS(acc_new(builtin_semiring("tropical-min")), CapabilityError);

  auto a = acc_new(n);
  acc_insert(a, nat(3));
  acc_insert(a, nat(4));
  CHECK(a.total() == nat(7));
  acc_delete(a, nat(3));
  CHECK(a.total() == nat(4));

  auto bb = acc_new(b);
  acc_insert(bb, b.one());
  acc_insert(bb, b.one());
  CHECK(bb.total() == b.one());
  acc_delete(bb, b.one());
  CHECK(bb.total() == b.one());
  acc_delete(bb, b.one());
  CHECK(b.is_zero(bb.total()));
  CHECK_THROWS_AS(acc_delete(bb, b.one()), ContractError);

  auto rr = acc_new(r);
  acc_insert(rr, real(1.5));
  acc_insert(rr, real(-0.5));
  CHECK(rr.total() == real(1.0));
}

TEST_CASE("accumulator matches a list fold under interleavings") {
  std::mt19937_64 rng(11);
  for (const char* name : {"boolean", "natural", "real"}) {
    auto s = builtin_semiring(name);
    auto vals = samples(s, rng, 50);
    auto acc = acc_new(s);
    std::vector<Value> live;
    for (int step = 0; step < 5000; ++step) {
      if (live.empty() || rng() % 3 != 0) {
        Value v = vals[rng() % vals.size()];
        acc_insert(acc, v);
        live.push_back(v);
      } else {
        std::size_t i = rng() % live.size();
        acc_delete(acc, live[i]);
        live[i] = live.back();
        live.pop_back();
      }
      Value fold = s.zero();
      for (Value v : live) fold = s.add(fold, v);
      REQUIRE(s.approx_equal(acc.total(), fold, 1e-6));
    }
  }
}

TEST_CASE("sum_of_ones") {
  auto n = builtin_semiring("natural");
  auto b = builtin_semiring("boolean");
  CHECK(sum_of_ones(n, 5) == nat(5));
  CHECK(sum_of_ones(b, 3) == b.one());
  CHECK(b.is_zero(sum_of_ones(b, 0)));
  for (const char* name : {"boolean", "natural", "real", "tropical-min"}) {
    auto s = builtin_semiring(name);
    Value fold = s.zero();
    for (std::uint64_t k = 0; k <= 1000; ++k) {
      REQUIRE(s.approx_equal(sum_of_ones(s, k), fold, 1e-12));
      fold = s.add(fold, s.one());
    }
  }
}

TEST_CASE("parse and format") {
  auto b = builtin_semiring("boolean");
  auto n = builtin_semiring("natural");
  auto t = builtin_semiring("tropical-min");
  CHECK(b.parse("t") == b.one());
  CHECK(b.parse("f") == b.zero());
  CHECK(n.parse("42") == nat(42));
  CHECK_THROWS_AS(n.parse("-1"), ConfigError);
  CHECK_THROWS_AS(builtin_semiring("real").parse("nan"), ConfigError);
  CHECK(t.is_zero(t.parse("inf")));
  CHECK(n.format(nat(9)) == "9");
  CHECK(b.format(b.one()) == "t");
}
