#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "anosov/chart.hpp"
#include "anosov/dopri.hpp"
#include "anosov/errors.hpp"
#include "anosov/linalg.hpp"

namespace anosov {

/// Phase-space point x = (p, v) with v of unit g-length.
struct TangentState {
  ChartPoint p;
  Vec2 v;
};

/// Jacobi data (j, j') along a geodesic.
struct JacobiState {
  double j = 0.0;
  double jp = 0.0;
};

/// Components of a perpendicular tangent vector in the (xi_h, xi_v) frame.
struct PerpVector {
  double c_h = 0.0;
  double c_v = 0.0;
};

inline double sasaki_norm(PerpVector w) { return std::hypot(w.c_h, w.c_v); }
inline Vec2 to_vec(PerpVector w) { return {w.c_h, w.c_v}; }
inline PerpVector to_perp(Vec2 v) { return {v.x, v.y}; }

struct FlowSample {
  double time = 0.0;
  TangentState state;
  double curvature = 0.0;
};

struct FlowSegment {
  std::vector<FlowSample> samples;
  double total_time = 0.0;
};

struct FlowOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double max_step = 0.01;
  double renorm_tol = 1e-8;
  /// Pre-renormalization speed drift beyond this aborts with StepFailure.
  double drift_limit = 1e-6;
  std::size_t max_steps = 100'000'000;
};

/// Integrator state: position, velocity, and the 2x2 Jacobi matrix columns
/// (j_h, j_h', j_v, j_v').
using FlowVector = std::array<double, 8>;

inline Mat2 jacobi_matrix(const FlowVector& y) { return {y[4], y[6], y[5], y[7]}; }

/// A portion of the trajectory inside one chart, either an accepted
/// Runge-Kutta step (with dense output) or an exact straight segment.
struct FlowPiece {
  const Chart* chart = nullptr;
  double t0 = 0.0;
  double t1 = 0.0;
  FlowVector start{};
  const DenseStep<8>* dense = nullptr;

  FlowVector at(double t) const {
    if (dense) return dense->at(t);
    const double s = t - t0;
    FlowVector y = start;
    y[0] += s * start[2];
    y[1] += s * start[3];
    y[4] += s * start[5];
    y[6] += s * start[7];
    return y;
  }
};

struct FlowEnd {
  TangentState state;
  Mat2 jacobi = Mat2::identity();
  double max_speed_drift = 0.0;
  std::size_t steps = 0;
  std::size_t handoffs = 0;
};

/// Geodesic + Jacobi integrator over an atlas.
///
/// Geodesic and Jacobi equations are one coupled first-order system so the
/// curvature is sampled at the same stage points as the Christoffel symbols.
/// Chart changes happen at overlap-collar midlines located on the dense
/// output; exactly flat regions are crossed analytically.
class GeodesicFlow {
 public:
  /// Flat runs shorter than this that do not end in a handoff are left to the stepper.
  static constexpr double kMinFlatRun = 1e-9;

  /// Observer returns false to stop the integration early.
  using Observer = std::function<bool(const FlowPiece&)>;

  explicit GeodesicFlow(const Atlas& atlas, FlowOptions options = {}) : atlas_(atlas), opt_(options) {}

  const FlowOptions& options() const { return opt_; }

  FlowEnd run(const TangentState& x, double duration, const Mat2& j0 = Mat2::identity(),
              const Observer& observer = nullptr) const {
    if (!(duration >= 0.0)) throw InvalidArgument("flow duration must be non-negative");
    const Chart* chart = &checked_chart(atlas_, x.p);
    FlowVector y{x.p.coords.x, x.p.coords.y, x.v.x, x.v.y, j0.a, j0.c, j0.b, j0.d};
    FlowEnd end;
    renormalize(*chart, y, end, false);

    DormandPrince54<8> stepper(opt_.rtol, opt_.atol);
    double t = 0.0;
    double h = opt_.max_step;
    FlowVector k1{};
    bool have_k1 = false;
    const double handoff_slack = 1e-9;
    double last_handoff_time = -1.0;
    int handoffs_at_same_time = 0;

    auto rhs_for = [](const Chart& c) {
      return [&c](const FlowVector& s) {
        const LocalGeometry geo = c.local_geometry({s[0], s[1]});
        const Vec2 a = geo.christoffel.acceleration({s[2], s[3]});
        const double k = geo.curvature;
        return FlowVector{s[2], s[3], a.x, a.y, s[5], -k * s[4], s[7], -k * s[6]};
      };
    };

    auto do_handoff = [&](FlowVector& s) {
      const auto hand = chart->overlap_transition({s[0], s[1]}, {s[2], s[3]});
      if (!hand) throw DomainEscape("trajectory left chart " + to_string(chart->id()) + " outside any overlap");
      chart = &atlas_.chart(hand->target);
      s[0] = hand->p.x;
      s[1] = hand->p.y;
      s[2] = hand->v.x;
      s[3] = hand->v.y;
      if (hand->flips_orientation) {
        for (int i = 4; i < 8; ++i) s[i] = -s[i];
      }
      renormalize(*chart, s, end);
      ++end.handoffs;
      have_k1 = false;
      if (t == last_handoff_time) {
        if (++handoffs_at_same_time > 4) {
          throw StepFailure("chart handoff oscillates at " + to_string(chart->id()));
        }
      } else {
        last_handoff_time = t;
        handoffs_at_same_time = 0;
      }
    };

    double margin = chart->handoff_margin({y[0], y[1]});
    if (margin < -handoff_slack) {
      do_handoff(y);
      margin = chart->handoff_margin({y[0], y[1]});
    }

    while (t < duration) {
      if (++end.steps > opt_.max_steps) throw StepFailure("step budget exhausted");
      const double remaining = duration - t;

      auto run = chart->flat_run({y[0], y[1]}, {y[2], y[3]}, remaining);
      if (run && !run->ends_in_handoff && run->length < kMinFlatRun) run.reset();
      if (run) {
        const double len = std::min(run->length, remaining);
        FlowPiece piece{chart, t, t + len, y, nullptr};
        y = piece.at(t + len);
        t = (len >= remaining) ? duration : t + len;
        if (observer && !observer(piece)) break;
        if (run->ends_in_handoff && len < remaining) do_handoff(y);
        canonicalize(*chart, y, have_k1);
        margin = chart->handoff_margin({y[0], y[1]});
        have_k1 = false;
        if (len > 0.0 || run->ends_in_handoff) continue;
      }

      auto rhs = rhs_for(*chart);
      if (!have_k1) {
        k1 = rhs(y);
        have_k1 = true;
      }
      const double hh = std::min({h, opt_.max_step, remaining});
      const bool clipped = hh >= remaining;
      const auto trial = stepper.step(rhs, y, k1, hh);
      if (!(trial.error <= 1.0)) {
        h = hh * (std::isfinite(trial.error) ? DormandPrince54<8>::step_factor(trial.error) : 0.2);
        if (h < 1e-14) throw StepFailure("step size underflow in chart " + to_string(chart->id()));
        continue;
      }

      const DenseStep<8> dense = stepper.dense(t);
      FlowVector y_new = trial.y;
      double t_new = clipped ? duration : t + hh;
      bool crossing = false;
      const double margin_new = chart->handoff_margin({y_new[0], y_new[1]});
      if (margin_new < 0.0 && margin >= 0.0) {
        double lo = t, hi = t + hh;
        for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
          const double mid = 0.5 * (lo + hi);
          const FlowVector ym = dense.at(mid);
          (chart->handoff_margin({ym[0], ym[1]}) >= 0.0 ? lo : hi) = mid;
        }
        y_new = dense.at(hi);
        t_new = hi;
        crossing = true;
      }
      if (observer) {
        FlowPiece piece{chart, t, t_new, y, &dense};
        if (!observer(piece)) {
          y = y_new;
          t = t_new;
          break;
        }
      }
      y = y_new;
      t = crossing ? t_new : (clipped ? duration : t + hh);
      k1 = trial.k_end;
      if (!clipped) h = std::min(opt_.max_step, hh * DormandPrince54<8>::step_factor(trial.error));
      renormalize(*chart, y, end);
      if (crossing) do_handoff(y);
      canonicalize(*chart, y, have_k1);
      if (!chart->contains({y[0], y[1]})) {
        throw DomainEscape("trajectory left the domain of chart " + to_string(chart->id()));
      }
      margin = chart->handoff_margin({y[0], y[1]});
      if (margin < -handoff_slack) {
        do_handoff(y);
        margin = chart->handoff_margin({y[0], y[1]});
      }
    }

    end.state = TangentState{ChartPoint{chart->id(), {y[0], y[1]}}, {y[2], y[3]}};
    end.jacobi = jacobi_matrix(y);
    return end;
  }

  const Atlas& atlas() const { return atlas_; }

 private:
  void renormalize(const Chart& c, FlowVector& y, FlowEnd& end, bool track = true) const {
    const Sym2 g = c.metric({y[0], y[1]});
    const double s2 = g.inner({y[2], y[3]}, {y[2], y[3]});
    const double drift = std::fabs(s2 - 1.0);
    if (!(s2 > 0.0) || !std::isfinite(s2)) throw InvalidArgument("velocity has no positive length");
    if (!track) {
      const double s = 1.0 / std::sqrt(s2);
      y[2] *= s;
      y[3] *= s;
      return;
    }
    end.max_speed_drift = std::max(end.max_speed_drift, drift);
    if (drift > opt_.drift_limit) throw StepFailure("unit speed drifted by " + std::to_string(drift));
    const double s = 1.0 / std::sqrt(s2);
    y[2] *= s;
    y[3] *= s;
  }

  static void canonicalize(const Chart& c, FlowVector& y, bool& have_k1) {
    const Vec2 q = c.canonicalize({y[0], y[1]});
    if (q.x != y[0] || q.y != y[1]) {
      y[0] = q.x;
      y[1] = q.y;
      have_k1 = false;
    }
  }

  const Atlas& atlas_;
  FlowOptions opt_;
};

inline TangentState reversed(const TangentState& x) { return {x.p, -x.v}; }

/// Unit tangent state at p whose velocity makes angle `angle` with the first
/// coordinate axis in a metric-orthonormal frame.
inline TangentState make_state(const Atlas& atlas, const ChartPoint& p, double angle) {
  return {p, unit_vector_at_angle(metric_at(atlas, p), angle)};
}

/// Endpoint of the geodesic flow phi^T(x); negative T flows backwards.
inline TangentState flow(const Atlas& atlas, const TangentState& x, double duration, const FlowOptions& opt = {}) {
  GeodesicFlow f(atlas, opt);
  if (duration >= 0.0) return f.run(x, duration).state;
  return reversed(f.run(reversed(x), -duration).state);
}

inline FlowSegment integrate_geodesic(const Atlas& atlas, const TangentState& x, double duration,
                                      const FlowOptions& opt = {}) {
  if (!(duration >= 0.0)) throw InvalidArgument("integrate_geodesic requires T >= 0");
  GeodesicFlow f(atlas, opt);
  FlowSegment seg;
  seg.total_time = duration;
  auto push = [&](const Chart& c, double t, const FlowVector& y) {
    const Vec2 p{y[0], y[1]};
    seg.samples.push_back({t, {{c.id(), p}, {y[2], y[3]}}, c.local_geometry(p).curvature});
  };
  {
    const Chart& c = checked_chart(atlas, x.p);
    FlowVector y0{x.p.coords.x, x.p.coords.y, x.v.x, x.v.y, 1, 0, 0, 1};
    push(c, 0.0, y0);
  }
  f.run(x, duration, Mat2::identity(), [&](const FlowPiece& piece) {
    if (piece.t1 <= piece.t0) return true;
    if (!piece.dense) {
      const int n = std::max(1, static_cast<int>(std::ceil((piece.t1 - piece.t0) / opt.max_step)));
      for (int i = 1; i <= n; ++i) {
        const double t = piece.t0 + (piece.t1 - piece.t0) * i / n;
        push(*piece.chart, t, piece.at(t));
      }
    } else {
      push(*piece.chart, piece.t1, piece.at(piece.t1));
    }
    return true;
  });
  return seg;
}

inline JacobiState jacobi_transport(const Atlas& atlas, const TangentState& x, double duration, JacobiState xi0,
                                    const FlowOptions& opt = {}) {
  const Mat2 j0{xi0.j, 0.0, xi0.jp, 1.0};
  const FlowEnd e = GeodesicFlow(atlas, opt).run(x, duration, j0);
  return {e.jacobi.a, e.jacobi.c};
}

/// Derivative of the time-T flow restricted to the perpendicular subspace, in
/// (xi_h, xi_v) coordinates. Columns are the images of (1,0) and (0,1).
inline Mat2 dphi_perp(const Atlas& atlas, const TangentState& x, double duration, const FlowOptions& opt = {}) {
  return GeodesicFlow(atlas, opt).run(x, duration).jacobi;
}

/// det D phi^T on the perpendicular subspace as the product of the block
/// determinants over consecutive windows of length `block`. Forming ad - bc of
/// the full matrix loses all digits once its entries pass ~1e8.
inline double dphi_perp_determinant(const Atlas& atlas, const TangentState& x, double duration, double block = 1.0,
                                    const FlowOptions& opt = {}) {
  if (!(duration >= 0.0 && block > 0.0)) throw InvalidArgument("dphi_perp_determinant requires T >= 0, block > 0");
  GeodesicFlow f(atlas, opt);
  double det = 1.0, t = 0.0;
  TangentState cur = x;
  while (t < duration) {
    const double h = std::min(block, duration - t);
    const FlowEnd e = f.run(cur, h);
    det *= e.jacobi.det();
    cur = e.state;
    t = h < block ? duration : t + h;
  }
  return det;
}

/// y = phi^{-tau}(x) together with D phi^tau at y, from a single backward pass.
///
/// Along the reversed geodesic the unit normal flips, so Jacobi data map as
/// (j, j') -> (-j, j'); with det = 1 the forward matrix [[a,b],[c,d]] at y is
/// obtained from the backward matrix [[d,b],[c,a]].
inline std::pair<TangentState, Mat2> pullback_dphi(const GeodesicFlow& f, const TangentState& x, double tau) {
  const FlowEnd back = f.run(reversed(x), tau);
  const Mat2& m = back.jacobi;
  return {reversed(back.state), Mat2{m.d, m.b, m.c, m.a}};
}

/// First time in (0, T] at which the Jacobi field with (j, j')(0) = (0, 1)
/// vanishes again, located by bisection on the dense output.
inline std::optional<double> detect_conjugate_point(const Atlas& atlas, const TangentState& x, double duration,
                                                    const FlowOptions& opt = {}, double time_tol = 1e-8) {
  if (!(duration > 0.0)) throw InvalidArgument("detect_conjugate_point requires T > 0");
  std::optional<double> hit;
  GeodesicFlow(atlas, opt).run(x, duration, Mat2{0.0, 0.0, 1.0, 0.0}, [&](const FlowPiece& piece) {
    const double j0 = piece.start[4];
    const double j1 = piece.at(piece.t1)[4];
    if (!(j0 > 0.0 && j1 <= 0.0)) return true;
    double lo = piece.t0, hi = piece.t1;
    while (hi - lo > 0.01 * time_tol) {
      const double mid = 0.5 * (lo + hi);
      (piece.at(mid)[4] > 0.0 ? lo : hi) = mid;
    }
    hit = 0.5 * (lo + hi);
    return false;
  });
  return hit;
}

}  // namespace anosov
