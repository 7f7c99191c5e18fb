#ifndef PTM_SCALAR_HPP
#define PTM_SCALAR_HPP

#include <gmpxx.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ptm {

// Exact arithmetic is GMP rationals; the float fallback is plain double.
using Rational = mpq_class;

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised when an estimator meets a state the theory says cannot occur
// (zero denominators, underflowed orbits, non-convergence).
struct NumericalAnomaly : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static constexpr bool exact = false;
  static double to_double(double x) { return x; }
  static double from_double(double x) { return x; }
  static double abs(double x) { return std::fabs(x); }
};

template <>
struct ScalarTraits<Rational> {
  static constexpr bool exact = true;
  // Round to nearest; mpq_get_d alone truncates toward zero.
  static double to_double(const Rational& x) {
    const double t = x.get_d();
    if (!std::isfinite(t)) return t;
    const double away = std::nextafter(t, x > 0 ? HUGE_VAL : -HUGE_VAL);
    if (!std::isfinite(away)) return t;
    return ::abs(Rational(away) - x) < ::abs(x - Rational(t)) ? away : t;
  }
  // Every finite double is a dyadic rational, so this is exact.
  static Rational from_double(double x) { return Rational(x); }
  static Rational abs(const Rational& x) { return ::abs(x); }
};

template <class S>
double to_double(const S& x) {
  return ScalarTraits<S>::to_double(x);
}

// Unevaluated gmpxx expressions.
template <class T, class U>
double to_double(const __gmp_expr<T, U>& x) {
  return ScalarTraits<Rational>::to_double(Rational(x));
}

template <class S>
S abs_value(const S& x) {
  return ScalarTraits<S>::abs(x);
}

// Parses a decimal literal such as "0.0004" or "1/2500" into an exact rational.
Rational parse_rational(std::string_view text);

}  // namespace ptm

#endif
