#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "anosov/errors.hpp"

namespace anosov {

/// Smooth monotone step: 0 for x <= 0, 1 for x >= 1, C-infinity everywhere,
/// built from exp(-1/x). `step_complement(x)` = 1 - step(x) without cancellation.
inline double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double z = 1.0 / x - 1.0 / (1.0 - x);
  return z > 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}
inline double step_complement(double x) { return smooth_step(1.0 - x); }
inline double smooth_step_derivative(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double b = smooth_step(x), bc = step_complement(x);
  return b * bc * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x)));
}

inline double smooth_step_second_derivative(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double b = smooth_step(x), bc = step_complement(x);
  const double q = 1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x));
  const double dq = -2.0 / (x * x * x) + 2.0 / ((1.0 - x) * (1.0 - x) * (1.0 - x));
  return b * bc * ((bc - b) * q * q + dq);
}

struct ProfileParams {
  /// Share of the slope change spent in the central convex band (0 < depth < 1).
  double depth = 0.15;
  /// Width of the two edge transitions in the normalized coordinate.
  double edge_width = 0.05;
  /// Length of the flat overlap collar at each end.
  double collar = 0.05;
  /// Smallest admissible waist radius as a fraction of the attachment radius.
  double min_waist_fraction = 0.2;
};

/// Meridian of a negatively curved tube of height 1, parametrized by arclength t in [0, L].
///
/// rho(t) is the distance to the axis and w(t) the height. On [0, collar] and
/// [L - collar, L] the meridian is a horizontal segment (rho' = -1 resp. +1,
/// w' = 0); these flat collars lie in the planes just outside the disk of
/// radius `attachment_radius`, so rho(0) = rho(L) = attachment_radius + collar.
/// In between, rho' = -1 + S(sigma) with sigma = (t - collar)/ell and
///   S = (1-d) step(sigma/e) + 2d step(sigma) + (1-d) step((sigma-1+e)/e),
/// which is non-decreasing, so rho'' >= 0 and K = -rho''/rho <= 0, with rho'' > 0
/// on the open interior band. ell is fixed by w(L) = 1.
class TubeProfile {
 public:
  struct Derivs {
    double rho = 0.0;
    double drho = 0.0;
    double d2rho = 0.0;
  };

  TubeProfile(double attachment_radius, const ProfileParams& p) : ra_(attachment_radius), p_(p) {
    if (!(attachment_radius > 0.0) || !std::isfinite(attachment_radius)) {
      throw InfeasibleProfile("attachment radius must be positive");
    }
    if (!(p.depth > 0.0 && p.depth < 1.0)) throw InfeasibleProfile("profile depth must lie in (0, 1)");
    if (!(p.edge_width > 0.0 && p.edge_width < 0.5)) throw InfeasibleProfile("edge width must lie in (0, 0.5)");
    if (!(p.collar > 0.0)) throw InfeasibleProfile("collar length must be positive");
    build_tables();
    ell_ = 1.0 / height_integral_;
    length_ = ell_ + 2.0 * p_.collar;
    waist_ = ra_ + ell_ * slope_table_[kPanels / 2];
    build_spline();
    if (!(waist_ >= p_.min_waist_fraction * ra_)) {
      throw InfeasibleProfile("tube of height 1 would pinch: waist " + std::to_string(waist_) +
                              " for attachment radius " + std::to_string(ra_));
    }
  }

  double attachment_radius() const { return ra_; }
  double collar() const { return p_.collar; }
  double length() const { return length_; }
  double interior_length() const { return ell_; }
  double waist() const { return waist_; }
  const ProfileParams& params() const { return p_; }

  /// rho, rho', rho'' from a quintic Hermite table (used on the integration path).
  Derivs derivs(double t) const {
    const bool upper = t > 0.5 * length_;
    const double tt = upper ? length_ - t : t;
    Derivs d;
    if (tt <= p_.collar) {
      d = {ra_ + p_.collar - tt, -1.0, 0.0};
    } else {
      const double x = (tt - p_.collar) / cell_;
      const std::size_t k = std::min<std::size_t>(kCells - 1, static_cast<std::size_t>(x));
      const double s = x - static_cast<double>(k);
      const auto& c = spline_[k];
      d.rho = c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))));
      d.drho = (c[1] + s * (2.0 * c[2] + s * (3.0 * c[3] + s * (4.0 * c[4] + s * 5.0 * c[5])))) / cell_;
      d.d2rho = std::max(0.0, (2.0 * c[2] + s * (6.0 * c[3] + s * (12.0 * c[4] + s * 20.0 * c[5]))) / (cell_ * cell_));
    }
    if (upper) d.drho = -d.drho;
    return d;
  }

  /// rho, rho', rho'' evaluated directly from the quadrature tables.
  Derivs exact_derivs(double t) const {
    const bool upper = t > 0.5 * length_;
    const double tt = upper ? length_ - t : t;
    Derivs d;
    if (tt <= p_.collar) {
      d = {ra_ + p_.collar - tt, -1.0, 0.0};
    } else {
      const double s = (tt - p_.collar) / ell_;
      d.rho = ra_ + ell_ * integrate_slope(s);
      d.drho = -1.0 + slope_sum(s);
      d.d2rho = slope_sum_derivative(s) / ell_;
    }
    if (upper) d.drho = -d.drho;
    return d;
  }
  double rho(double t) const { return derivs(t).rho; }

  /// rho and its first three derivatives.
  std::array<double, 4> rho_derivs3(double t) const {
    const Derivs d = exact_derivs(t);
    const double tt = std::min(t, length_ - t);
    double d3 = 0.0;
    if (tt > p_.collar) d3 = slope_sum_second_derivative((tt - p_.collar) / ell_) / (ell_ * ell_);
    if (t > 0.5 * length_) d3 = -d3;
    return {d.rho, d.drho, d.d2rho, d3};
  }

  /// w and its first three derivatives.
  std::array<double, 4> height_derivs3(double t) const {
    const auto r = rho_derivs3(t);
    const double w1 = dheight(t);
    if (!(w1 > 0.0)) return {height(t), 0.0, 0.0, 0.0};
    const double w2 = -r[1] * r[2] / w1;
    const double w3 = -(r[2] * r[2] + r[1] * r[3]) / w1 + r[1] * r[2] * w2 / (w1 * w1);
    return {height(t), w1, w2, w3};
  }
  double curvature(double t) const {
    const Derivs d = derivs(t);
    return -d.d2rho / d.rho;
  }

  /// Height w(t) and its derivative w'(t) = sqrt(1 - rho'^2).
  double height(double t) const {
    const bool upper = t > 0.5 * length_;
    const double tt = upper ? length_ - t : t;
    double w = 0.0;
    if (tt > p_.collar) w = ell_ * integrate_height(std::min(0.5, (tt - p_.collar) / ell_));
    return upper ? 1.0 - w : w;
  }
  double dheight(double t) const {
    const double tt = std::min(t, length_ - t);
    if (tt <= p_.collar) return 0.0;
    return height_rate((tt - p_.collar) / ell_);
  }

  /// S(sigma) = 1 + rho'.
  double slope_sum(double s) const {
    const double d = p_.depth, e = p_.edge_width;
    return (1.0 - d) * smooth_step(s / e) + 2.0 * d * smooth_step(s) + (1.0 - d) * smooth_step((s - 1.0 + e) / e);
  }
  /// 2 - S(sigma) = 1 - rho', evaluated without cancellation.
  double slope_sum_complement(double s) const {
    const double d = p_.depth, e = p_.edge_width;
    return (1.0 - d) * step_complement(s / e) + 2.0 * d * step_complement(s) +
           (1.0 - d) * step_complement((s - 1.0 + e) / e);
  }
  double slope_sum_derivative(double s) const {
    const double d = p_.depth, e = p_.edge_width;
    return (1.0 - d) * smooth_step_derivative(s / e) / e + 2.0 * d * smooth_step_derivative(s) +
           (1.0 - d) * smooth_step_derivative((s - 1.0 + e) / e) / e;
  }
  double slope_sum_second_derivative(double s) const {
    const double d = p_.depth, e = p_.edge_width;
    return (1.0 - d) * smooth_step_second_derivative(s / e) / (e * e) +
           2.0 * d * smooth_step_second_derivative(s) +
           (1.0 - d) * smooth_step_second_derivative((s - 1.0 + e) / e) / (e * e);
  }

 private:
  static constexpr std::size_t kPanels = 4096;
  static constexpr std::size_t kCells = 4096;

  void build_spline() {
    cell_ = (0.5 * length_ - p_.collar) / kCells;
    spline_.resize(kCells);
    Derivs prev = exact_derivs(p_.collar);
    for (std::size_t k = 0; k < kCells; ++k) {
      const Derivs next = exact_derivs(p_.collar + (k + 1) * cell_);
      const double h = cell_;
      const double c0 = prev.rho, c1 = h * prev.drho, c2 = 0.5 * h * h * prev.d2rho;
      const double A = next.rho - c0 - c1 - c2;
      const double B = h * next.drho - c1 - 2.0 * c2;
      const double C = h * h * next.d2rho - 2.0 * c2;
      spline_[k] = {c0, c1, c2, 10.0 * A - 4.0 * B + 0.5 * C, -15.0 * A + 7.0 * B - C, 6.0 * A - 3.0 * B + 0.5 * C};
      prev = next;
    }
  }

  // Gauss-Legendre nodes/weights on [-1, 1]
  static constexpr std::array<double, 4> kGl8x{0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                               0.9602898564975363};
  static constexpr std::array<double, 4> kGl8w{0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                               0.1012285362903763};
  static constexpr std::array<double, 2> kGl4x{0.3399810435848563, 0.8611363115940526};
  static constexpr std::array<double, 2> kGl4w{0.6521451548625461, 0.3478548451374538};

  double slope(double s) const { return -1.0 + slope_sum(s); }
  double height_rate(double s) const { return std::sqrt(slope_sum(s) * slope_sum_complement(s)); }

  template <class F>
  static double gl8(const F& f, double a, double b) {
    const double m = 0.5 * (a + b), r = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t i = 0; i < 4; ++i) acc += kGl8w[i] * (f(m - r * kGl8x[i]) + f(m + r * kGl8x[i]));
    return r * acc;
  }
  template <class F>
  static double gl4(const F& f, double a, double b) {
    const double m = 0.5 * (a + b), r = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t i = 0; i < 2; ++i) acc += kGl4w[i] * (f(m - r * kGl4x[i]) + f(m + r * kGl4x[i]));
    return r * acc;
  }

  void build_tables() {
    slope_table_.assign(kPanels + 1, 0.0);
    height_table_.assign(kPanels + 1, 0.0);
    const double h = 1.0 / kPanels;
    auto sl = [this](double s) { return slope(s); };
    auto hr = [this](double s) { return height_rate(s); };
    for (std::size_t k = 0; k < kPanels; ++k) {
      const double a = k * h, b = (k + 1) * h;
      slope_table_[k + 1] = slope_table_[k] + gl8(sl, a, b);
      height_table_[k + 1] = height_table_[k] + gl8(hr, a, b);
    }
    // exact symmetry: the height rate is symmetric, so the half integral is exact to use
    height_integral_ = 2.0 * height_table_[kPanels / 2];
  }

  double integrate_slope(double s) const {
    s = std::clamp(s, 0.0, 1.0);
    const std::size_t k = std::min<std::size_t>(kPanels - 1, static_cast<std::size_t>(s * kPanels));
    const double a = static_cast<double>(k) / kPanels;
    return slope_table_[k] + (s > a ? gl4([this](double x) { return slope(x); }, a, s) : 0.0);
  }
  double integrate_height(double s) const {
    s = std::clamp(s, 0.0, 1.0);
    const std::size_t k = std::min<std::size_t>(kPanels - 1, static_cast<std::size_t>(s * kPanels));
    const double a = static_cast<double>(k) / kPanels;
    return height_table_[k] + (s > a ? gl4([this](double x) { return height_rate(x); }, a, s) : 0.0);
  }

  double ra_;
  ProfileParams p_;
  double cell_ = 0.0;
  std::vector<std::array<double, 6>> spline_;
  std::vector<double> slope_table_;
  std::vector<double> height_table_;
  double height_integral_ = 0.0;
  double ell_ = 0.0;
  double length_ = 0.0;
  double waist_ = 0.0;
};

inline TubeProfile build_tube_profile(double attachment_radius, double depth = ProfileParams{}.depth) {
  ProfileParams p;
  p.depth = depth;
  return TubeProfile(attachment_radius, p);
}

inline TubeProfile build_tube_profile(double attachment_radius, const ProfileParams& params) {
  return TubeProfile(attachment_radius, params);
}

}  // namespace anosov
