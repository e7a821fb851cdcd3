#pragma once

#include <bit>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

namespace deltaenum {

/** Opaque 64-bit semiring value; meaning depends on the semiring it belongs to. */
class Value {
 public:
  constexpr Value() = default;

  static constexpr Value from_bits(std::uint64_t b) { return Value(b); }
  static constexpr Value natural(std::uint64_t n) { return Value(n); }
  static constexpr Value boolean(bool b) { return Value(b ? 1 : 0); }
  static Value real(double d) { return Value(std::bit_cast<std::uint64_t>(d)); }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr std::uint64_t as_natural() const { return bits_; }
  constexpr bool as_bool() const { return bits_ != 0; }
  double as_real() const { return std::bit_cast<double>(bits_); }

  friend constexpr bool operator==(Value, Value) = default;

 private:
  constexpr explicit Value(std::uint64_t b) : bits_(b) {}
  std::uint64_t bits_ = 0;
};

enum class SemiringKind { Boolean, Natural, Real, TropicalMin };

/**
 * Commutative semiring descriptor. Immutable and cheap to copy.
 * Operations dispatch on the kind; all four builtins fit in a Value.
 */
class Semiring {
 public:
  explicit Semiring(SemiringKind kind) : kind_(kind) {}

  SemiringKind kind() const { return kind_; }
  std::string_view name() const;

  Value zero() const;
  Value one() const;

  Value add(Value a, Value b) const {
    switch (kind_) {
      case SemiringKind::Boolean: return Value::boolean(a.as_bool() || b.as_bool());
      case SemiringKind::Natural: return Value::natural(a.as_natural() + b.as_natural());
      case SemiringKind::Real: return Value::real(a.as_real() + b.as_real());
      case SemiringKind::TropicalMin: return a.as_real() <= b.as_real() ? a : b;
    }
    return a;
  }

  Value mul(Value a, Value b) const {
    switch (kind_) {
      case SemiringKind::Boolean: return Value::boolean(a.as_bool() && b.as_bool());
      case SemiringKind::Natural: return Value::natural(a.as_natural() * b.as_natural());
      case SemiringKind::Real: return Value::real(a.as_real() * b.as_real());
      case SemiringKind::TropicalMin: return Value::real(a.as_real() + b.as_real());
    }
    return a;
  }

  bool is_zero(Value a) const {
    switch (kind_) {
      case SemiringKind::Boolean:
      case SemiringKind::Natural: return a.bits() == 0;
      case SemiringKind::Real: return a.as_real() == 0.0;
      case SemiringKind::TropicalMin: return a.as_real() == std::numeric_limits<double>::infinity();
    }
    return false;
  }

  bool zero_divisor_free() const { return true; }
  bool zero_sum_free() const { return kind_ != SemiringKind::Real; }
  bool sum_maintainable() const { return kind_ != SemiringKind::TropicalMin; }

  /** Parses a data-file literal (`t`/`f` for boolean, decimal otherwise). Throws ConfigError. */
  Value parse(std::string_view text) const;
  std::string format(Value v) const;

  /** Exact equality, or |a-b| <= tol * max(1,|a|,|b|) for floating kinds. */
  bool approx_equal(Value a, Value b, double tol) const;

  friend bool operator==(const Semiring& a, const Semiring& b) { return a.kind_ == b.kind_; }

 private:
  SemiringKind kind_;
};

/** Looks up one of boolean, natural, real, tropical-min. Throws ConfigError otherwise. */
Semiring builtin_semiring(std::string_view name);

/** n-fold sum of one, by doubling. */
Value sum_of_ones(const Semiring& s, std::uint64_t n);

/**
 * Multiset of semiring values with O(1) insert, delete and total.
 * Rings keep a running sum; boolean keeps the number of true members.
 */
class SumAccumulator {
 public:
  explicit SumAccumulator(const Semiring& s);

  void insert(Value k);
  /** Removes one copy of k. Throws ContractError when empty. */
  void erase(Value k);
  Value total() const;
  std::uint64_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

 private:
  SemiringKind kind_;
  std::uint64_t count_ = 0;
  std::uint64_t ones_ = 0;
  Value sum_;
};

/** Throws CapabilityError if s is not sum-maintainable. */
SumAccumulator acc_new(const Semiring& s);
inline void acc_insert(SumAccumulator& a, Value k) { a.insert(k); }
inline void acc_delete(SumAccumulator& a, Value k) { a.erase(k); }

}  // namespace deltaenum
