#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>

#include "anosov/chart.hpp"

namespace anosov {

/// Single chart whose metric is a closed-form template
/// `std::array<S,3> f(S x1, S x2)` over scalar types S.
///
/// The second coordinate may be declared periodic; points are then wrapped
/// into [0, period).
template <class MetricFn>
class FunctionChart final : public Chart {
 public:
  FunctionChart(ChartId id, MetricFn fn, Box box, double period2 = 0.0, bool flat = false)
      : Chart(id), fn_(fn), box_(box), period2_(period2), flat_(flat) {}

  bool contains(Vec2 p) const override {
    const bool second = period2_ > 0.0 || (p.y >= box_.lo.y && p.y <= box_.hi.y);
    return p.x >= box_.lo.x && p.x <= box_.hi.x && second && std::isfinite(p.y);
  }
  MetricJet metric_jet(Vec2 p) const override { return metric_jet_of(fn_, p); }
  Sym2 metric(Vec2 p) const override {
    const auto e = fn_(p.x, p.y);
    return {e[0], e[1], e[2]};
  }
  Box parameter_box() const override { return box_; }
  Vec2 canonicalize(Vec2 p) const override {
    if (period2_ > 0.0) {
      double y = std::fmod(p.y, period2_);
      if (y < 0.0) y += period2_;
      if (y >= period2_) y = 0.0;
      p.y = y;
    }
    return p;
  }
  std::optional<FlatRun> flat_run(Vec2, Vec2, double remaining) const override {
    if (!flat_) return std::nullopt;
    return FlatRun{remaining, false};
  }

 private:
  MetricFn fn_;
  Box box_;
  double period2_;
  bool flat_;
};

template <class MetricFn>
Atlas single_chart_atlas(MetricFn fn, Box box, double period2 = 0.0, bool flat = false) {
  Atlas atlas;
  atlas.add(std::make_shared<FunctionChart<MetricFn>>(ChartId{ChartKind::Generic, 0}, fn, box, period2, flat));
  return atlas;
}

namespace metrics {

struct Euclidean {
  template <class S>
  std::array<S, 3> operator()(const S&, const S&) const {
    return {S(1.0), S(0.0), S(1.0)};
  }
};

/// Upper half-plane, g = (dx^2 + dy^2) / y^2.
struct HyperbolicHalfPlane {
  template <class S>
  std::array<S, 3> operator()(const S&, const S& y) const {
    const S k = 1.0 / (y * y);
    return {k, S(0.0), k};
  }
};

/// dt^2 + cosh(t)^2 dtheta^2, curvature -1, closed geodesic at t = 0.
struct HyperbolicCylinder {
  template <class S>
  std::array<S, 3> operator()(const S& t, const S&) const {
    using std::cosh;
    const S c = cosh(t);
    return {S(1.0), S(0.0), c * c};
  }
};

/// dt^2 + cos(t)^2 dtheta^2 (latitude t), curvature +1.
struct RoundSphere {
  template <class S>
  std::array<S, 3> operator()(const S& t, const S&) const {
    using std::cos;
    const S c = cos(t);
    return {S(1.0), S(0.0), c * c};
  }
};

}  // namespace metrics

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

inline Atlas flat_plane_atlas() {
  return single_chart_atlas(metrics::Euclidean{}, Box{{-kUnbounded, -kUnbounded}, {kUnbounded, kUnbounded}}, 0.0,
                            true);
}

/// Same flat plane but integrated by the Runge-Kutta path instead of the
/// analytic straight-line path.
inline Atlas flat_plane_atlas_numeric() {
  return single_chart_atlas(metrics::Euclidean{}, Box{{-kUnbounded, -kUnbounded}, {kUnbounded, kUnbounded}});
}

inline Atlas hyperbolic_half_plane_atlas() {
  return single_chart_atlas(metrics::HyperbolicHalfPlane{}, Box{{-kUnbounded, 1e-300}, {kUnbounded, kUnbounded}});
}

inline Atlas hyperbolic_cylinder_atlas() {
  return single_chart_atlas(metrics::HyperbolicCylinder{}, Box{{-700.0, 0.0}, {700.0, 2.0 * std::numbers::pi}},
                            2.0 * std::numbers::pi);
}

inline Atlas round_sphere_atlas() {
  const double lim = 0.5 * std::numbers::pi - 1e-6;
  return single_chart_atlas(metrics::RoundSphere{}, Box{{-lim, 0.0}, {lim, 2.0 * std::numbers::pi}},
                            2.0 * std::numbers::pi);
}

}  // namespace anosov
