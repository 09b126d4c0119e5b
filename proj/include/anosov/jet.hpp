#pragma once

#include <array>
#include <cmath>

namespace anosov {

/// Second-order forward-mode jet in two variables: value, gradient and the
/// upper triangle of the Hessian (d11, d12, d22).
///
/// Chart metrics are written once as templates over the scalar type and
/// instantiated with Jet to obtain exact first and second coordinate
/// derivatives.
struct Jet {
  double v = 0.0;
  std::array<double, 2> d{0.0, 0.0};
  std::array<double, 3> h{0.0, 0.0, 0.0};

  constexpr Jet() = default;
  constexpr Jet(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

  static constexpr Jet variable(double value, int index) {
    Jet j(value);
    j.d[index] = 1.0;
    return j;
  }

  /// Applies a univariate function given its value and first two derivatives
  /// at this jet's value.
  constexpr Jet compose(double f0, double f1, double f2) const {
    Jet r(f0);
    r.d = {f1 * d[0], f1 * d[1]};
    r.h = {f1 * h[0] + f2 * d[0] * d[0],
           f1 * h[1] + f2 * d[0] * d[1],
           f1 * h[2] + f2 * d[1] * d[1]};
    return r;
  }
};

constexpr Jet operator+(const Jet& a, const Jet& b) {
  Jet r(a.v + b.v);
  r.d = {a.d[0] + b.d[0], a.d[1] + b.d[1]};
  r.h = {a.h[0] + b.h[0], a.h[1] + b.h[1], a.h[2] + b.h[2]};
  return r;
}
constexpr Jet operator-(const Jet& a) {
  Jet r(-a.v);
  r.d = {-a.d[0], -a.d[1]};
  r.h = {-a.h[0], -a.h[1], -a.h[2]};
  return r;
}
constexpr Jet operator-(const Jet& a, const Jet& b) { return a + (-b); }
constexpr Jet operator*(const Jet& a, const Jet& b) {
  Jet r(a.v * b.v);
  r.d = {a.d[0] * b.v + a.v * b.d[0], a.d[1] * b.v + a.v * b.d[1]};
  r.h = {a.h[0] * b.v + 2.0 * a.d[0] * b.d[0] + a.v * b.h[0],
         a.h[1] * b.v + a.d[0] * b.d[1] + a.d[1] * b.d[0] + a.v * b.h[1],
         a.h[2] * b.v + 2.0 * a.d[1] * b.d[1] + a.v * b.h[2]};
  return r;
}
constexpr Jet reciprocal(const Jet& a) {
  const double iv = 1.0 / a.v;
  return a.compose(iv, -iv * iv, 2.0 * iv * iv * iv);
}
constexpr Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

constexpr Jet operator+(const Jet& a, double s) { Jet r = a; r.v += s; return r; }
constexpr Jet operator+(double s, const Jet& a) { return a + s; }
constexpr Jet operator-(const Jet& a, double s) { return a + (-s); }
constexpr Jet operator-(double s, const Jet& a) { return (-a) + s; }
constexpr Jet operator*(const Jet& a, double s) {
  Jet r(a.v * s);
  r.d = {a.d[0] * s, a.d[1] * s};
  r.h = {a.h[0] * s, a.h[1] * s, a.h[2] * s};
  return r;
}
constexpr Jet operator*(double s, const Jet& a) { return a * s; }
constexpr Jet operator/(const Jet& a, double s) { return a * (1.0 / s); }
constexpr Jet operator/(double s, const Jet& a) { return reciprocal(a) * s; }

inline Jet sin(const Jet& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return a.compose(s, c, -s);
}
inline Jet cos(const Jet& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return a.compose(c, -s, -c);
}
inline Jet exp(const Jet& a) {
  const double e = std::exp(a.v);
  return a.compose(e, e, e);
}
inline Jet log(const Jet& a) { return a.compose(std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }
inline Jet sqrt(const Jet& a) {
  const double s = std::sqrt(a.v);
  return a.compose(s, 0.5 / s, -0.25 / (s * a.v));
}
inline Jet cosh(const Jet& a) {
  const double c = std::cosh(a.v), s = std::sinh(a.v);
  return a.compose(c, s, c);
}
inline Jet sinh(const Jet& a) {
  const double c = std::cosh(a.v), s = std::sinh(a.v);
  return a.compose(s, c, s);
}
inline Jet square(const Jet& a) { return a * a; }
inline double square(double a) { return a * a; }

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.v; }

}  // namespace anosov
