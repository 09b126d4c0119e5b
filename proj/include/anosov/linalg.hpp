#pragma once

#include <array>
#include <cmath>

namespace anosov {

/// Two-component vector used for chart coordinates and chart velocity components.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  constexpr double operator[](int i) const { return i == 0 ? x : y; }
};

constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 normalized(Vec2 a) { return a / norm(a); }

/// Dense 2x2 matrix [[a, b], [c, d]].
struct Mat2 {
  double a = 1.0, b = 0.0;
  double c = 0.0, d = 1.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr Mat2 from_columns(Vec2 c0, Vec2 c1) { return {c0.x, c1.x, c0.y, c1.y}; }

  constexpr Vec2 col(int i) const { return i == 0 ? Vec2{a, c} : Vec2{b, d}; }
  constexpr double det() const { return a * d - b * c; }
  constexpr Mat2 adjugate() const { return {d, -b, -c, a}; }
  constexpr Mat2 transpose() const { return {a, c, b, d}; }
  constexpr Mat2 inverse() const {
    const double k = 1.0 / det();
    return {d * k, -b * k, -c * k, a * k};
  }
};

constexpr Vec2 operator*(const Mat2& m, Vec2 v) { return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y}; }
constexpr Mat2 operator*(const Mat2& m, const Mat2& n) {
  return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
          m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
}
constexpr Mat2 operator*(double s, const Mat2& m) { return {s * m.a, s * m.b, s * m.c, s * m.d}; }

inline double max_abs_diff(const Mat2& m, const Mat2& n) {
  return std::fmax(std::fmax(std::fabs(m.a - n.a), std::fabs(m.b - n.b)),
                   std::fmax(std::fabs(m.c - n.c), std::fabs(m.d - n.d)));
}

/// Symmetric 2x2 matrix (g11, g12, g22).
struct Sym2 {
  double g11 = 0.0, g12 = 0.0, g22 = 0.0;

  constexpr double det() const { return g11 * g22 - g12 * g12; }
  constexpr double operator()(int i, int j) const {
    return (i == 0 && j == 0) ? g11 : (i == 1 && j == 1) ? g22 : g12;
  }
  constexpr Sym2 inverse() const {
    const double k = 1.0 / det();
    return {g22 * k, -g12 * k, g11 * k};
  }
  constexpr double inner(Vec2 u, Vec2 v) const {
    return g11 * u.x * v.x + g12 * (u.x * v.y + u.y * v.x) + g22 * u.y * v.y;
  }
  constexpr Vec2 apply(Vec2 v) const { return {g11 * v.x + g12 * v.y, g12 * v.x + g22 * v.y}; }
  /// Eigenvalues in ascending order.
  std::array<double, 2> eigenvalues() const {
    const double m = 0.5 * (g11 + g22);
    const double r = std::hypot(0.5 * (g11 - g22), g12);
    return {m - r, m + r};
  }
};

constexpr Sym2 operator+(Sym2 a, Sym2 b) { return {a.g11 + b.g11, a.g12 + b.g12, a.g22 + b.g22}; }
constexpr Sym2 operator*(double s, Sym2 a) { return {s * a.g11, s * a.g12, s * a.g22}; }

/// Congruence J^T S J for a 2x2 Jacobian J.
constexpr Sym2 congruence(const Mat2& j, const Sym2& s) {
  const Vec2 c0 = j.col(0), c1 = j.col(1);
  return {s.inner(c0, c0), s.inner(c0, c1), s.inner(c1, c1)};
}

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace anosov
