#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "anosov/chart.hpp"
#include "anosov/errors.hpp"
#include "anosov/jet.hpp"
#include "anosov/model_space.hpp"
#include "anosov/pullback.hpp"

namespace anosov {

using Vec3 = std::array<double, 3>;
/// 3x3 matrix, row-major: m[row][col].
using Mat3 = std::array<std::array<double, 3>, 3>;

/// X_s(u, v, w): the slab R^2 x [0, 1] wrapped onto nested tori.
template <class S>
std::array<S, 3> embed_point_t(const S& u, const S& v, const S& w, const EmbeddingParams& e) {
  using std::cos;
  using std::sin;
  const S ring = e.R1 + (e.R2 + w) * cos(v / e.R2);
  return {ring * cos(u / e.R1), ring * sin(u / e.R1), (e.R2 + w) * sin(v / e.R2)};
}

inline Vec3 embed_point(const Vec3& q, const EmbeddingParams& e) { return embed_point_t(q[0], q[1], q[2], e); }

/// DX_s with columns ordered (d/du, d/dv, d/dw).
inline Mat3 embed_jacobian(const Vec3& q, const EmbeddingParams& e) {
  const double u = q[0], v = q[1], w = q[2];
  const double cu = std::cos(u / e.R1), su = std::sin(u / e.R1);
  const double cv = std::cos(v / e.R2), sv = std::sin(v / e.R2);
  const double ring = e.R1 + (e.R2 + w) * cv;
  const double k = (e.R2 + w) / e.R2;
  return {{{-ring / e.R1 * su, -k * sv * cu, cv * cu},
           {ring / e.R1 * cu, -k * sv * su, cv * su},
           {0.0, k * cv, sv}}};
}

/// The limit of DX_s as R1, R2 -> infinity with R2/R1 -> 0, at u = v = 0.
inline Mat3 limit_jacobian() { return {{{0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}}; }

inline double max_abs_diff(const Mat3& a, const Mat3& b) {
  double m = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m = std::max(m, std::fabs(a[i][j] - b[i][j]));
  return m;
}

/// Derivatives of the diagonal pullback entries that can vary: Q11(v, w) and Q22(w).
struct PullbackDerivatives {
  double q11 = 1.0, q22 = 1.0, q33 = 1.0;
  double q11_v = 0.0, q11_w = 0.0, q22_w = 0.0;
  double q11_vv = 0.0, q11_vw = 0.0, q11_ww = 0.0, q22_ww = 0.0;
};

/// Pulled-back Euclidean metric diag(Q11, Q22, Q33) in (u, v, w) coordinates.
class PullbackMetric {
 public:
  explicit PullbackMetric(EmbeddingParams e) : e_(e) { e_.validate(); }

  const EmbeddingParams& params() const { return e_; }
  double Q11(const Vec3& q) const { return pullback_q11(e_, q[1], q[2]); }
  double Q22(const Vec3& q) const { return pullback_q22(e_, q[2]); }
  double Q33(const Vec3&) const { return 1.0; }

  PullbackDerivatives derivatives(const Vec3& q) const {
    const double v = q[1], w = q[2], R1 = e_.R1, R2 = e_.R2;
    const double c = std::cos(v / R2), s = std::sin(v / R2);
    const double f = 1.0 + (R2 + w) * c / R1;
    const double fv = -(R2 + w) * s / (R1 * R2), fw = c / R1;
    const double fvv = -(R2 + w) * c / (R1 * R2 * R2), fvw = -s / (R1 * R2);
    const double g = 1.0 + w / R2;
    PullbackDerivatives d;
    d.q11 = f * f;
    d.q22 = g * g;
    d.q11_v = 2.0 * f * fv;
    d.q11_w = 2.0 * f * fw;
    d.q22_w = 2.0 * g / R2;
    d.q11_vv = 2.0 * (fv * fv + f * fvv);
    d.q11_vw = 2.0 * (fv * fw + f * fvw);
    d.q11_ww = 2.0 * fw * fw;
    d.q22_ww = 2.0 / (R2 * R2);
    return d;
  }

 private:
  EmbeddingParams e_;
};

inline PullbackMetric pullback_metric(const EmbeddingParams& e) { return PullbackMetric(e); }

struct RadiusSchedule {
  std::string name;
  std::function<double(double)> R1_of_s;
  std::function<double(double)> R2_of_s;

  EmbeddingParams at(double s) const { return {R1_of_s(s), R2_of_s(s)}; }
};

inline RadiusSchedule default_schedule() {
  const double k = 0.5 / std::numbers::pi;
  return {"default", [k](double s) { return k * s * s; }, [k](double s) { return k * s; }};
}
inline RadiusSchedule equal_radii_schedule() {
  const double k = 0.5 / std::numbers::pi;
  return {"equal", [k](double s) { return k * s; }, [k](double s) { return k * s; }};
}
inline RadiusSchedule sqrt2_schedule() {
  const double k = 0.5 / std::numbers::pi;
  return {"sqrt2", [k](double s) { return k * std::pow(s, std::numbers::sqrt2); }, [k](double s) { return k * s; }};
}

inline std::optional<RadiusSchedule> schedule_by_name(const std::string& name) {
  if (name == "default") return default_schedule();
  if (name == "equal") return equal_radii_schedule();
  if (name == "sqrt2") return sqrt2_schedule();
  return std::nullopt;
}

struct ConvergenceRegion {
  /// Extent in u and v; non-positive values mean one period (2 pi R1, 2 pi R2).
  double u_extent = 0.0;
  double v_extent = 0.0;
  int nu = 8;
  int nv = 257;
  int nw = 11;
};

struct ConvergenceRow {
  double s = 0.0;
  double sup0 = 0.0;
  double sup1 = 0.0;
  double sup2 = 0.0;
};

/// Sup-norm deviation of Q_s from the identity, in derivative orders 0, 1, 2,
/// over a grid of the region x [0, 1]. Each order takes the maximum over all
/// entries and all partial derivatives of that order.
inline std::vector<ConvergenceRow> convergence_report(const RadiusSchedule& schedule, const std::vector<double>& s_values,
                                                      const ConvergenceRegion& region = {}) {
  std::vector<ConvergenceRow> rows;
  for (double s : s_values) {
    const EmbeddingParams e = schedule.at(s);
    const PullbackMetric q(e);
    const double ue = region.u_extent > 0.0 ? region.u_extent : 2.0 * std::numbers::pi * e.R1;
    const double ve = region.v_extent > 0.0 ? region.v_extent : 2.0 * std::numbers::pi * e.R2;
    ConvergenceRow row;
    row.s = s;
    for (int i = 0; i < region.nu; ++i) {
      const double u = ue * i / std::max(1, region.nu - 1);
      for (int j = 0; j < region.nv; ++j) {
        const double v = ve * j / std::max(1, region.nv - 1);
        for (int k = 0; k < region.nw; ++k) {
          const double w = static_cast<double>(k) / std::max(1, region.nw - 1);
          const PullbackDerivatives d = q.derivatives({u, v, w});
          row.sup0 = std::max({row.sup0, std::fabs(d.q11 - 1.0), std::fabs(d.q22 - 1.0)});
          row.sup1 = std::max({row.sup1, std::fabs(d.q11_v), std::fabs(d.q11_w), std::fabs(d.q22_w)});
          row.sup2 = std::max({row.sup2, std::fabs(d.q11_vv), std::fabs(d.q11_vw), std::fabs(d.q11_ww),
                               std::fabs(d.q22_ww)});
        }
      }
    }
    rows.push_back(row);
  }
  return rows;
}

inline constexpr double kIntTol = 1e-9;

/// (m, n) = (2 pi R1, 2 pi R2) when both are integers within kIntTol.
inline std::optional<std::pair<long, long>> periodicity_check(const EmbeddingParams& e) {
  const double m = 2.0 * std::numbers::pi * e.R1, n = 2.0 * std::numbers::pi * e.R2;
  const double mr = std::round(m), nr = std::round(n);
  if (std::fabs(m - mr) > kIntTol || std::fabs(n - nr) > kIntTol || mr < 1.0 || nr < 1.0) return std::nullopt;
  return std::make_pair(static_cast<long>(mr), static_cast<long>(nr));
}

inline long embedded_genus(long m, long n, long disks_per_cell) {
  if (m < 1 || n < 1 || disks_per_cell < 0) throw InvalidArgument("embedded_genus requires m, n >= 1");
  return disks_per_cell * m * n + 1;
}

/// First conjugate time along a geodesic of the w = 0 torus, by fixed-step RK4
/// on (u, v, u', v', j, j') with the closed-form metric diag(f(v)^2, 1),
/// f = 1 + R2 cos(v / R2) / R1, and K = -f'' / f. The geodesic starts at
/// (u0, v0) with unit velocity (cos angle / f, sin angle); j(0) = 0, j'(0) = 1.
inline std::optional<double> torus_conjugate_time_reference(const EmbeddingParams& e, double u0, double v0, double angle,
                                                            double duration, double h) {
  e.validate();
  if (!(duration > 0.0 && h > 0.0)) throw InvalidArgument("reference integration needs T > 0 and h > 0");
  using State = std::array<double, 6>;
  auto f = [&](double v) { return 1.0 + e.R2 * std::cos(v / e.R2) / e.R1; };
  auto fp = [&](double v) { return -std::sin(v / e.R2) / e.R1; };
  auto fpp = [&](double v) { return -std::cos(v / e.R2) / (e.R1 * e.R2); };
  auto rhs = [&](const State& y) {
    const double F = f(y[1]), Fp = fp(y[1]);
    const double K = -fpp(y[1]) / F;
    return State{y[2], y[3], -2.0 * Fp / F * y[2] * y[3], F * Fp * y[2] * y[2], y[5], -K * y[4]};
  };
  State y{u0, v0, std::cos(angle) / f(v0), std::sin(angle), 0.0, 1.0};
  const long n = static_cast<long>(std::ceil(duration / h));
  const double dt = duration / static_cast<double>(n);
  for (long i = 0; i < n; ++i) {
    const State k1 = rhs(y);
    State tmp;
    for (int c = 0; c < 6; ++c) tmp[c] = y[c] + 0.5 * dt * k1[c];
    const State k2 = rhs(tmp);
    for (int c = 0; c < 6; ++c) tmp[c] = y[c] + 0.5 * dt * k2[c];
    const State k3 = rhs(tmp);
    for (int c = 0; c < 6; ++c) tmp[c] = y[c] + dt * k3[c];
    const State k4 = rhs(tmp);
    State next;
    for (int c = 0; c < 6; ++c) next[c] = y[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    if (i > 0 && y[4] > 0.0 && next[4] <= 0.0) {
      // Cubic Hermite on (j, j') over the step, then bisection for the root.
      const double j0 = y[4], j1 = next[4], d0 = y[5] * dt, d1 = next[5] * dt;
      auto H = [&](double s) {
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * j0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * j1 + (s3 - s2) * d1;
      };
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (H(mid) > 0.0 ? lo : hi) = mid;
      }
      return (static_cast<double>(i) + 0.5 * (lo + hi)) * dt;
    }
    y = next;
  }
  return std::nullopt;
}

/// The model surface with the metric induced by X_s, divided by its period
/// lattice m Z x n Z.
inline ModelSpace embedded_model_space(const DiskLattice& lattice, const EmbeddingParams& e,
                                       const ProfileParams& profile = {}) {
  e.require_embedded_slab();
  const auto mn = periodicity_check(e);
  if (!mn) throw NonPeriodic("2 pi R1 and 2 pi R2 must both be integers for a periodic metric");
  ModelOptions opt;
  opt.profile = profile;
  opt.quotient = {static_cast<int>(mn->first), static_cast<int>(mn->second)};
  opt.immersion = e;
  return build_model_space(lattice, opt);
}

/// Chart point -> (u, v, w) for the plane and tube charts of a model space.
template <class S>
std::array<S, 3> chart_immersion(const Chart& chart, const S& x1, const S& x2) {
  if (const auto* plane = dynamic_cast<const PlaneChart*>(&chart)) return {x1, x2, S(plane->height())};
  if (const auto* tube = dynamic_cast<const TubeChart*>(&chart)) {
    using std::cos;
    using std::sin;
    const double t = value_of(x1);
    const auto r = tube->profile().rho_derivs3(t);
    const auto w = tube->profile().height_derivs3(t);
    S R, W;
    if constexpr (std::is_same_v<S, Jet>) {
      R = x1.compose(r[0], r[1], r[2]);
      W = x1.compose(w[0], w[1], w[2]);
    } else {
      R = r[0];
      W = w[0];
    }
    return {tube->center().x + R * cos(x2), tube->center().y + R * sin(x2), W};
  }
  throw InvalidArgument("chart " + to_string(chart.id()) + " has no immersion into the slab");
}

/// J^T Q J at p for the chart's immersion into (u, v, w); Q = I when params is empty.
inline Sym2 induced_chart_metric(const Chart& chart, const std::optional<EmbeddingParams>& params, Vec2 p) {
  const auto q = chart_immersion(chart, Jet::variable(p.x, 0), Jet::variable(p.y, 1));
  double diag[3] = {1.0, 1.0, 1.0};
  if (params) {
    diag[0] = pullback_q11(*params, q[1].v, q[2].v);
    diag[1] = pullback_q22(*params, q[2].v);
  }
  Sym2 g;
  for (int k = 0; k < 3; ++k) {
    g.g11 += diag[k] * q[k].d[0] * q[k].d[0];
    g.g12 += diag[k] * q[k].d[0] * q[k].d[1];
    g.g22 += diag[k] * q[k].d[1] * q[k].d[1];
  }
  return g;
}

}  // namespace anosov
