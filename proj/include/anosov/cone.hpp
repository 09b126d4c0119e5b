#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anosov/chart.hpp"
#include "anosov/errors.hpp"
#include "anosov/flow.hpp"
#include "anosov/linalg.hpp"
#include "anosov/parallel.hpp"

namespace anosov {

/// Double cone {a X + b Y : a b >= 0} in the perpendicular (xi_h, xi_v) plane.
struct Cone {
  PerpVector X{1.0, 0.0};
  PerpVector Y{0.0, 1.0};
};

inline Cone standard_cone() { return {{1.0, 0.0}, {0.0, 1.0}}; }
/// {a xi_h + b xi_v : a b <= 0}.
inline Cone complement_cone() { return {{0.0, 1.0}, {-1.0, 0.0}}; }

namespace detail {

inline constexpr double kParallelTol = 1e-14;

/// Cone as a sector of directions modulo pi: counter-clockwise from `start` with opening `width`.
struct Sector {
  double start = 0.0;
  double width = 0.0;
};

inline double angle_mod_pi(Vec2 v) {
  double a = std::atan2(v.y, v.x);
  if (a < 0.0) a += std::numbers::pi;
  if (a >= std::numbers::pi) a -= std::numbers::pi;
  return a;
}

inline Sector sector_of(const Cone& c) {
  const Vec2 x = normalized(to_vec(c.X)), y = normalized(to_vec(c.Y));
  const double cr = cross(x, y);
  if (!(std::fabs(cr) > kParallelTol)) throw DegenerateCone("cone edges are parallel");
  const double w = std::atan2(std::fabs(cr), dot(x, y));
  return {angle_mod_pi(cr > 0.0 ? x : y), w};
}

}  // namespace detail

/// Opening angle arccos<X, Y> in (0, pi).
inline double cone_angle(const Cone& c) {
  const Vec2 x = to_vec(c.X), y = to_vec(c.Y);
  const double nx = norm(x), ny = norm(y);
  if (!(nx > 0.0 && ny > 0.0)) throw DegenerateCone("cone edge has zero length");
  const double cr = cross(x, y) / (nx * ny);
  if (!(std::fabs(cr) > detail::kParallelTol)) throw DegenerateCone("cone edges are parallel");
  return std::atan2(std::fabs(cr), dot(x, y) / (nx * ny));
}

inline Cone map_cone(const Mat2& a, const Cone& c) {
  const double scale = std::fmax(std::fmax(std::fabs(a.a), std::fabs(a.b)), std::fmax(std::fabs(a.c), std::fabs(a.d)));
  if (!(scale > 0.0) || !(std::fabs(a.det()) > 1e-14 * scale * scale)) throw SingularMatrix("cone map is singular");
  return {to_perp(normalized(a * to_vec(c.X))), to_perp(normalized(a * to_vec(c.Y)))};
}

struct Containment {
  bool strict = false;
  double margin = 0.0;  // smallest angular clearance of inner edges from outer edges, negative if outside
};

inline Containment strict_containment(const Cone& inner, const Cone& outer) {
  const detail::Sector in = detail::sector_of(inner), out = detail::sector_of(outer);
  double delta = in.start - out.start;
  delta -= std::numbers::pi * std::floor(delta / std::numbers::pi);
  auto margin_for = [&](double d) { return std::min(d, out.width - d - in.width); };
  const double m = std::max(margin_for(delta), margin_for(delta - std::numbers::pi));
  return {m > 0.0, m};
}

struct ConeScanConfig {
  double tau = 1.0;
  /// Sample points per coordinate direction of each chart's parameter box.
  int spatial = 32;
  /// Velocity directions per sample point.
  int angular = 64;
  Cone cone = standard_cone();
  FlowOptions flow;
  unsigned threads = 1;
  /// Scan the complement cone under the time-reversed flow instead.
  bool backward = false;
  /// Keep every sample in the report (for tabular output).
  bool keep_samples = false;
};

struct ConeSample {
  ChartId chart;
  Vec2 coords;
  double angle = 0.0;
  double delta_theta = 0.0;
  double margin = 0.0;
  std::string error;  // non-empty when the orbit could not be integrated
};

struct ConeScanReport {
  double max_delta_theta = 0.0;
  double min_edge_margin = std::numeric_limits<double>::infinity();
  std::vector<ConeSample> violations;
  std::vector<ConeSample> samples;
  double tau = 0.0;
  std::size_t n_samples = 0;

  bool pass() const { return violations.empty() && max_delta_theta < 1.0; }
};

struct ConeEvaluation {
  double delta_theta = 0.0;
  Containment containment;
};

/// Image cone at x of the cone at phi^{-tau} x (or, backwards, of the cone at
/// phi^{tau} x under the reversed flow), compared with the cone at x.
inline ConeEvaluation evaluate_cone(const GeodesicFlow& flow, const TangentState& x, double tau, const Cone& cone,
                                    bool backward = false) {
  if (!(tau >= 0.0)) throw InvalidArgument("tau must be non-negative");
  Mat2 m = Mat2::identity();
  if (tau > 0.0) {
    if (backward) {
      m = flow.run(x, tau).jacobi.inverse();
    } else {
      m = pullback_dphi(flow, x, tau).second;
    }
  }
  const Cone image = map_cone(m, cone);
  return {cone_angle(image) / cone_angle(cone), strict_containment(image, cone)};
}

inline double delta_theta(const Atlas& atlas, const TangentState& x, const ConeScanConfig& cfg) {
  GeodesicFlow flow(atlas, cfg.flow);
  return evaluate_cone(flow, x, cfg.tau, cfg.cone, cfg.backward).delta_theta;
}

/// Sample points of the phase-space grid: chart-box midpoints owned by each chart.
inline std::vector<ChartPoint> scan_points(const Atlas& atlas, int spatial) {
  std::vector<ChartPoint> pts;
  for (const auto& chart : atlas.charts()) {
    const Box box = chart->parameter_box();
    for (int i = 0; i < spatial; ++i) {
      for (int j = 0; j < spatial; ++j) {
        const Vec2 p{box.lo.x + (i + 0.5) / spatial * (box.hi.x - box.lo.x),
                     box.lo.y + (j + 0.5) / spatial * (box.hi.y - box.lo.y)};
        if (chart->owns(p)) pts.push_back({chart->id(), p});
      }
    }
  }
  return pts;
}

/// Evaluates the cone criterion at every grid sample of the unit sphere bundle
/// over the atlas. A sample whose orbit fails to integrate counts as a violation.
inline ConeScanReport scan_uniform_invariance(const Atlas& atlas, const ConeScanConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw InvalidArgument("scan tau must be positive");
  if (cfg.spatial < 2 || cfg.angular < 2) throw InvalidArgument("scan resolutions must be >= 2");
  cone_angle(cfg.cone);
  const std::vector<ChartPoint> pts = scan_points(atlas, cfg.spatial);
  const std::size_t n = pts.size() * static_cast<std::size_t>(cfg.angular);
  std::vector<ConeSample> out(n);
  GeodesicFlow flow(atlas, cfg.flow);
  parallel_for(n, cfg.threads, [&](std::size_t idx) {
    const ChartPoint& p = pts[idx / cfg.angular];
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(idx % cfg.angular) / cfg.angular;
    ConeSample& s = out[idx];
    s.chart = p.chart;
    s.coords = p.coords;
    s.angle = ang;
    try {
      const TangentState x = make_state(atlas, p, ang);
      const ConeEvaluation e = evaluate_cone(flow, x, cfg.tau, cfg.cone, cfg.backward);
      s.delta_theta = e.delta_theta;
      s.margin = e.containment.margin;
    } catch (const Error& err) {
      s.delta_theta = std::numeric_limits<double>::quiet_NaN();
      s.margin = std::numeric_limits<double>::quiet_NaN();
      s.error = err.what();
    }
  });
  ConeScanReport rep;
  rep.tau = cfg.tau;
  rep.n_samples = n;
  for (const ConeSample& s : out) {
    if (!s.error.empty()) {
      rep.violations.push_back(s);
      continue;
    }
    rep.max_delta_theta = std::max(rep.max_delta_theta, s.delta_theta);
    rep.min_edge_margin = std::min(rep.min_edge_margin, s.margin);
    if (!(s.margin > 0.0)) rep.violations.push_back(s);
  }
  if (cfg.keep_samples) rep.samples = std::move(out);
  return rep;
}

struct SplittingEstimate {
  TangentState x;
  PerpVector eu;
  PerpVector es;
  int n_iterations = 0;
  /// Opening angle of the n-fold image of the standard cone (unstable side)
  /// and of the n-fold backward image of the complement cone (stable side).
  double residual_unstable = 0.0;
  double residual_stable = 0.0;
  /// Both residual cones collapsed below 1e-6 rad.
  bool converged = false;
};

namespace detail {

inline Vec2 unit(Vec2 v) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw StepFailure("tangent vector degenerated");
  return v / n;
}

}  // namespace detail

/// Unstable and stable directions at x from nested cone images over n blocks of length tau.
inline SplittingEstimate estimate_splitting(const Atlas& atlas, const TangentState& x, double tau, int n,
                                            const FlowOptions& opt = {}) {
  if (n < 1) throw InvalidArgument("estimate_splitting requires n >= 1");
  if (!(tau > 0.0)) throw InvalidArgument("estimate_splitting requires tau > 0");
  GeodesicFlow flow(atlas, opt);
  SplittingEstimate est;
  est.x = x;
  est.n_iterations = n;

  // Blocks ending at x: M_k maps phi^{-k tau} x to phi^{-(k-1) tau} x.
  std::vector<Mat2> back;
  TangentState cur = x;
  for (int k = 0; k < n; ++k) {
    auto [y, m] = pullback_dphi(flow, cur, tau);
    back.push_back(m);
    cur = y;
  }
  Vec2 u{std::sqrt(0.5), std::sqrt(0.5)}, ex{1.0, 0.0}, ey{0.0, 1.0};
  for (int k = n - 1; k >= 0; --k) {
    u = detail::unit(back[k] * u);
    ex = detail::unit(back[k] * ex);
    ey = detail::unit(back[k] * ey);
  }
  est.eu = to_perp(u);
  est.residual_unstable = std::atan2(std::fabs(cross(ex, ey)), dot(ex, ey));

  // Blocks starting at x: N_k maps phi^{(k-1) tau} x to phi^{k tau} x.
  std::vector<Mat2> fwd;
  cur = x;
  for (int k = 0; k < n; ++k) {
    const FlowEnd e = flow.run(cur, tau);
    fwd.push_back(e.jacobi);
    cur = e.state;
  }
  Vec2 s{std::sqrt(0.5), -std::sqrt(0.5)}, fx{0.0, 1.0}, fy{-1.0, 0.0};
  for (int k = n - 1; k >= 0; --k) {
    const Mat2 inv = fwd[k].inverse();
    s = detail::unit(inv * s);
    fx = detail::unit(inv * fx);
    fy = detail::unit(inv * fy);
  }
  est.es = to_perp(s);
  est.residual_stable = std::atan2(std::fabs(cross(fx, fy)), dot(fx, fy));
  est.converged = est.residual_unstable < 1e-6 && est.residual_stable < 1e-6;
  return est;
}

struct LyapunovEstimate {
  double lambda = 0.0;
  /// min and max over block end times t of |D phi^t e_u| / exp(lambda t).
  std::pair<double, double> C_bounds{1.0, 1.0};
  double T = 0.0;
  TangentState x0;
};

/// Growth rate of the estimated unstable vector along the orbit of x over time T,
/// renormalized every tau. The unstable seed is the nested cone image over
/// ceil(T / tau) backward blocks.
inline LyapunovEstimate lyapunov_exponent(const Atlas& atlas, const TangentState& x, double T, double tau,
                                          const FlowOptions& opt = {}) {
  if (!(T > 0.0 && tau > 0.0 && T >= tau)) throw InvalidArgument("lyapunov_exponent requires T >= tau > 0");
  const int blocks = static_cast<int>(std::ceil(T / tau - 1e-12));
  const SplittingEstimate split = estimate_splitting(atlas, x, tau, blocks, opt);
  GeodesicFlow flow(atlas, opt);
  Vec2 v = to_vec(split.eu);
  TangentState cur = x;
  CompensatedSum log_growth;
  std::vector<std::pair<double, double>> trace;  // (time, accumulated log growth)
  double t = 0.0;
  for (int k = 0; k < blocks; ++k) {
    const double h = std::min(tau, T - t);
    const FlowEnd e = flow.run(cur, h);
    v = e.jacobi * v;
    const double nv = norm(v);
    log_growth.add(std::log(nv));
    v = v / nv;
    cur = e.state;
    t = (k + 1 == blocks) ? T : t + h;
    trace.emplace_back(t, log_growth.value());
  }
  LyapunovEstimate est;
  est.T = T;
  est.x0 = x;
  est.lambda = log_growth.value() / T;
  double lo = 1.0, hi = 1.0;
  for (const auto& [tk, lg] : trace) {
    const double ratio = std::exp(lg - est.lambda * tk);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  est.C_bounds = {lo, hi};
  return est;
}

}  // namespace anosov
