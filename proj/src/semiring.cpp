#include "deltaenum/semiring.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "deltaenum/errors.hpp"

namespace deltaenum {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double parse_double(std::string_view text) {
  std::string s(text);
  if (s == "inf" || s == "+inf" || s == "infinity") return kInf;
  char* end = nullptr;
  double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || std::isnan(d))
    throw ConfigError("not a decimal value: '" + s + "'");
  return d;
}

}  // namespace

std::string_view Semiring::name() const {
  switch (kind_) {
    case SemiringKind::Boolean: return "boolean";
    case SemiringKind::Natural: return "natural";
    case SemiringKind::Real: return "real";
    case SemiringKind::TropicalMin: return "tropical-min";
  }
  return "?";
}

Value Semiring::zero() const {
  switch (kind_) {
    case SemiringKind::Boolean: return Value::boolean(false);
    case SemiringKind::Natural: return Value::natural(0);
    case SemiringKind::Real: return Value::real(0.0);
    case SemiringKind::TropicalMin: return Value::real(kInf);
  }
  return {};
}

Value Semiring::one() const {
  switch (kind_) {
    case SemiringKind::Boolean: return Value::boolean(true);
    case SemiringKind::Natural: return Value::natural(1);
    case SemiringKind::Real: return Value::real(1.0);
    case SemiringKind::TropicalMin: return Value::real(0.0);
  }
  return {};
}

Value Semiring::parse(std::string_view text) const {
  switch (kind_) {
    case SemiringKind::Boolean:
      if (text == "t" || text == "true" || text == "1") return Value::boolean(true);
      if (text == "f" || text == "false" || text == "0") return Value::boolean(false);
      throw ConfigError("not a boolean value (expected t/f): '" + std::string(text) + "'");
    case SemiringKind::Natural: {
      std::uint64_t n = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
      if (ec != std::errc() || p != text.data() + text.size())
        throw ConfigError("not a natural number: '" + std::string(text) + "'");
      return Value::natural(n);
    }
    case SemiringKind::Real: {
      double d = parse_double(text);
      if (std::isinf(d)) throw ConfigError("real value must be finite: '" + std::string(text) + "'");
      return Value::real(d);
    }
    case SemiringKind::TropicalMin: {
      double d = parse_double(text);
      if (d == -kInf) throw ConfigError("tropical value must not be -inf");
      return Value::real(d);
    }
  }
  return {};
}

std::string Semiring::format(Value v) const {
  switch (kind_) {
    case SemiringKind::Boolean: return v.as_bool() ? "t" : "f";
    case SemiringKind::Natural: return std::to_string(v.as_natural());
    case SemiringKind::Real:
    case SemiringKind::TropicalMin: {
      double d = v.as_real();
      if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
      std::ostringstream os;
      os.precision(17);
      os << d;
      return os.str();
    }
  }
  return {};
}

bool Semiring::approx_equal(Value a, Value b, double tol) const {
  if (kind_ == SemiringKind::Boolean || kind_ == SemiringKind::Natural) return a == b;
  double x = a.as_real(), y = b.as_real();
  if (x == y) return true;
  if (std::isinf(x) || std::isinf(y)) return false;
  double scale = std::max({1.0, std::fabs(x), std::fabs(y)});
  return std::fabs(x - y) <= tol * scale;
}

Semiring builtin_semiring(std::string_view name) {
  if (name == "boolean") return Semiring(SemiringKind::Boolean);
  if (name == "natural") return Semiring(SemiringKind::Natural);
  if (name == "real") return Semiring(SemiringKind::Real);
  if (name == "tropical-min") return Semiring(SemiringKind::TropicalMin);
  throw ConfigError("unknown semiring '" + std::string(name) +
                    "' (expected boolean, natural, real or tropical-min)");
}

Value sum_of_ones(const Semiring& s, std::uint64_t n) {
  Value result = s.zero();
  Value power = s.one();  // sum of 2^i ones
  while (n != 0) {
    if (n & 1) result = s.add(result, power);
    n >>= 1;
    if (n != 0) power = s.add(power, power);
  }
  return result;
}

SumAccumulator::SumAccumulator(const Semiring& s) : kind_(s.kind()), sum_(s.zero()) {}

void SumAccumulator::insert(Value k) {
  ++count_;
  switch (kind_) {
    case SemiringKind::Boolean:
      if (k.as_bool()) ++ones_;
      break;
    case SemiringKind::Natural:
      sum_ = Value::natural(sum_.as_natural() + k.as_natural());
      break;
    case SemiringKind::Real:
      sum_ = Value::real(sum_.as_real() + k.as_real());
      break;
    case SemiringKind::TropicalMin:
      throw CapabilityError("tropical-min is not sum-maintainable");
  }
}

void SumAccumulator::erase(Value k) {
  if (count_ == 0) throw ContractError("delete from an empty accumulator");
  --count_;
  switch (kind_) {
    case SemiringKind::Boolean:
      if (k.as_bool()) {
        if (ones_ == 0) throw ContractError("deleted value is not in the accumulator");
        --ones_;
      }
      break;
    case SemiringKind::Natural:
      sum_ = Value::natural(sum_.as_natural() - k.as_natural());
      break;
    case SemiringKind::Real:
      // an emptied accumulator snaps back to an exact zero so drift cannot leak
      sum_ = count_ == 0 ? Value::real(0.0) : Value::real(sum_.as_real() - k.as_real());
      break;
    case SemiringKind::TropicalMin:
      throw CapabilityError("tropical-min is not sum-maintainable");
  }
}

Value SumAccumulator::total() const {
  if (kind_ == SemiringKind::Boolean) return Value::boolean(ones_ > 0);
  return sum_;
}

SumAccumulator acc_new(const Semiring& s) {
  if (!s.sum_maintainable())
    throw CapabilityError("semiring '" + std::string(s.name()) + "' is not sum-maintainable");
  return SumAccumulator(s);
}

}  // namespace deltaenum
