#pragma once

#include <cmath>

#include <Eigen/Core>

namespace ace {

/// Forward-mode dual number `value + tangent * e` with e^2 = 0.
///
/// Running a reverse sweep with this scalar seeds one tangent direction and
/// yields a Hessian-vector product (forward-over-reverse).
struct Dual {
  double value = 0.0;
  double tangent = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(double v, double t) : value(v), tangent(t) {}

  Dual& operator+=(const Dual& o) {
    value += o.value;
    tangent += o.tangent;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    value -= o.value;
    tangent -= o.tangent;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    tangent = tangent * o.value + value * o.tangent;
    value *= o.value;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    tangent = (tangent * o.value - value * o.tangent) / (o.value * o.value);
    value /= o.value;
    return *this;
  }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.value, -a.tangent}; }
inline Dual operator+(const Dual& a) { return a; }

inline bool operator<(const Dual& a, const Dual& b) { return a.value < b.value; }
inline bool operator>(const Dual& a, const Dual& b) { return a.value > b.value; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.value <= b.value; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.value >= b.value; }
inline bool operator==(const Dual& a, const Dual& b) { return a.value == b.value; }
inline bool operator!=(const Dual& a, const Dual& b) { return a.value != b.value; }

inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value);
  return {e, e * a.tangent};
}
inline Dual log(const Dual& a) { return {std::log(a.value), a.tangent / a.value}; }
inline Dual log1p(const Dual& a) { return {std::log1p(a.value), a.tangent / (1.0 + a.value)}; }
inline Dual tanh(const Dual& a) {
  const double t = std::tanh(a.value);
  return {t, (1.0 - t * t) * a.tangent};
}
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.value);
  return {s, a.tangent / (2.0 * s)};
}
inline Dual abs(const Dual& a) { return a.value < 0 ? -a : a; }
inline bool isfinite(const Dual& a) { return std::isfinite(a.value) && std::isfinite(a.tangent); }

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value; }

}  // namespace ace

namespace Eigen {

template <>
struct NumTraits<ace::Dual> : NumTraits<double> {
  using Real = ace::Dual;
  using NonInteger = ace::Dual;
  using Nested = ace::Dual;
  using Literal = ace::Dual;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 2,
    MulCost = 4,
  };
};

}  // namespace Eigen
