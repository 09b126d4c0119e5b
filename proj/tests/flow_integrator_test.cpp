#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "anosov/analytic_charts.hpp"
#include "anosov/flow.hpp"

using namespace anosov;

namespace {

constexpr double kPi = std::numbers::pi;

ChartPoint at(double x, double y) { return {ChartId{ChartKind::Generic, 0}, {x, y}}; }

// Unit-speed geodesic along the closed waist t = 0 of dt^2 + cosh^2 t dtheta^2 (K = -1).
TangentState waist_state(double theta = 0.3) { return {at(0.0, theta), {0.0, 1.0}}; }

// Equator of the round sphere (K = +1).
TangentState equator_state() { return {at(0.0, 1.0), {0.0, 1.0}}; }

}  // namespace

TEST(IntegrateGeodesic, FlatStraightLine) {
  for (const Atlas& a : {flat_plane_atlas(), flat_plane_atlas_numeric()}) {
    const FlowSegment seg = integrate_geodesic(a, {at(0, 0), {1, 0}}, 5.0);
    const auto& last = seg.samples.back();
    EXPECT_NEAR(last.time, 5.0, 1e-15);
    EXPECT_NEAR(last.state.p.coords.x, 5.0, 1e-12);
    EXPECT_NEAR(last.state.p.coords.y, 0.0, 1e-12);
    EXPECT_NEAR(last.state.v.x, 1.0, 1e-14);
    EXPECT_NEAR(last.state.v.y, 0.0, 1e-14);
  }
}

TEST(IntegrateGeodesic, SamplesIncreaseAndRespectMaxStep) {
  const FlowSegment seg = integrate_geodesic(round_sphere_atlas(), {at(0.2, 0.0), {0.6, 0.9}}, 3.0);
  ASSERT_GT(seg.samples.size(), 300u);
  for (std::size_t i = 1; i < seg.samples.size(); ++i) {
    const double dt = seg.samples[i].time - seg.samples[i - 1].time;
    ASSERT_GT(dt, 0.0);
    ASSERT_LE(dt, 0.01 + 1e-15);
  }
  EXPECT_DOUBLE_EQ(seg.total_time, 3.0);
  EXPECT_NEAR(seg.samples.back().time, 3.0, 1e-14);
}

TEST(IntegrateGeodesic, WaistGeodesicStaysOnWaist) {
  const FlowSegment seg = integrate_geodesic(hyperbolic_cylinder_atlas(), waist_state(), 10.0);
  for (const auto& s : seg.samples) {
    ASSERT_NEAR(s.state.p.coords.x, 0.0, 1e-8);
    ASSERT_NEAR(s.curvature, -1.0, 1e-12);
  }
  // theta wrapped into [0, 2 pi)
  const double theta = seg.samples.back().state.p.coords.y;
  EXPECT_NEAR(theta, std::fmod(0.3 + 10.0, 2.0 * kPi), 1e-9);
}

TEST(IntegrateGeodesic, UnitSpeedAndClairautOnSphere) {
  const Atlas a = round_sphere_atlas();
  const TangentState x = make_state(a, at(0.3, 0.0), 0.9);
  const Sym2 g0 = metric_at(a, x.p);
  const double clairaut0 = g0.g22 * x.v.y;
  const FlowSegment seg = integrate_geodesic(a, x, 20.0);
  for (const auto& s : seg.samples) {
    const Sym2 g = metric_at(a, s.state.p);
    ASSERT_NEAR(g.inner(s.state.v, s.state.v), 1.0, 1e-8);
    ASSERT_NEAR(g.g22 * s.state.v.y, clairaut0, 1e-8 * std::fabs(clairaut0));
  }
  const FlowEnd end = GeodesicFlow(a).run(x, 20.0);
  EXPECT_LT(end.max_speed_drift, 1e-8);
}

TEST(IntegrateGeodesic, NegativeDurationRejected) {
  EXPECT_THROW(integrate_geodesic(flat_plane_atlas(), {at(0, 0), {1, 0}}, -1.0), InvalidArgument);
}

TEST(JacobiTransport, FlatIsAffine) {
  for (const Atlas& a : {flat_plane_atlas(), flat_plane_atlas_numeric()}) {
    for (double t : {0.5, 3.0, 10.0}) {
      const JacobiState r = jacobi_transport(a, {at(0, 0), {0.6, 0.8}}, t, {0.7, -0.2});
      EXPECT_NEAR(r.j, 0.7 - 0.2 * t, 1e-8);
      EXPECT_NEAR(r.jp, -0.2, 1e-8);
    }
    const JacobiState r = jacobi_transport(a, {at(0, 0), {1, 0}}, 4.0, {0.0, 1.0});
    EXPECT_NEAR(r.j, 4.0, 1e-8);
    EXPECT_NEAR(r.jp, 1.0, 1e-8);
  }
}

TEST(JacobiTransport, ConstantNegativeCurvatureGivesHyperbolicFunctions) {
  const Atlas a = hyperbolic_cylinder_atlas();
  for (double t : {1.0, 2.5, 5.0, 7.5, 10.0}) {
    const JacobiState r = jacobi_transport(a, waist_state(), t, {1.0, 0.0});
    EXPECT_NEAR(r.j, std::cosh(t), 1e-6) << t;
    EXPECT_NEAR(r.jp, std::sinh(t), 1e-6) << t;
  }
}

TEST(JacobiTransport, ConstantPositiveCurvatureGivesSine) {
  const JacobiState r = jacobi_transport(round_sphere_atlas(), equator_state(), kPi, {0.0, 1.0});
  EXPECT_NEAR(r.j, 0.0, 1e-8);
  EXPECT_NEAR(r.jp, -1.0, 1e-8);
}

TEST(JacobiTransport, LinearInInitialData) {
  const Atlas a = round_sphere_atlas();
  const TangentState x = make_state(a, at(0.2, 0.5), 1.1);
  const JacobiState xi{0.3, -1.2}, eta{-0.8, 0.5};
  const double al = 1.7, be = -0.6;
  const JacobiState lhs = jacobi_transport(a, x, 6.0, {al * xi.j + be * eta.j, al * xi.jp + be * eta.jp});
  const JacobiState r1 = jacobi_transport(a, x, 6.0, xi), r2 = jacobi_transport(a, x, 6.0, eta);
  const double sj = al * r1.j + be * r2.j, sjp = al * r1.jp + be * r2.jp;
  EXPECT_NEAR(lhs.j, sj, 1e-8 * (1.0 + std::fabs(sj)));
  EXPECT_NEAR(lhs.jp, sjp, 1e-8 * (1.0 + std::fabs(sjp)));
}

TEST(DphiPerp, FlatShear) {
  for (double tau : {0.25, 1.0, 4.0}) {
    const Mat2 m = dphi_perp(flat_plane_atlas(), {at(1, 1), {0, 1}}, tau);
    EXPECT_LT(max_abs_diff(m, Mat2{1.0, tau, 0.0, 1.0}), 1e-12);
  }
}

TEST(DphiPerp, ConstantNegativeCurvatureFundamentalSolution) {
  const double t = 2.0;
  const Mat2 m = dphi_perp(hyperbolic_cylinder_atlas(), waist_state(), t);
  EXPECT_LT(max_abs_diff(m, Mat2{std::cosh(t), std::sinh(t), std::sinh(t), std::cosh(t)}), 1e-8);
  EXPECT_NEAR(m.det(), 1.0, 1e-8);
}

TEST(DphiPerp, AreaPreservedOnRandomOrbits) {
  const Atlas a = round_sphere_atlas();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lat(-1.0, 1.0), ang(0.0, 2.0 * kPi), dur(0.0, 20.0);
  for (int i = 0; i < 25; ++i) {
    const TangentState x = make_state(a, at(lat(rng), ang(rng)), ang(rng));
    EXPECT_NEAR(dphi_perp(a, x, dur(rng)).det(), 1.0, 1e-6);
  }
}

TEST(DphiPerp, Cocycle) {
  const Atlas a = round_sphere_atlas();
  const TangentState x = make_state(a, at(0.4, 1.0), 0.3);
  const double s = 1.3, t = 2.1;
  const Mat2 whole = dphi_perp(a, x, s + t);
  const Mat2 first = dphi_perp(a, x, s);
  const Mat2 second = dphi_perp(a, flow(a, x, s), t);
  EXPECT_LT(max_abs_diff(whole, second * first), 1e-6);
}

TEST(DphiPerp, SinglePassPullbackMatchesForwardIntegration) {
  for (const Atlas& a : {round_sphere_atlas(), hyperbolic_cylinder_atlas()}) {
    const TangentState x = make_state(a, at(0.1, 2.0), 0.7);
    GeodesicFlow f(a);
    const auto [y, m] = pullback_dphi(f, x, 1.7);
    const Mat2 forward = dphi_perp(a, y, 1.7);
    EXPECT_LT(max_abs_diff(m, forward), 1e-8);
    const TangentState back = flow(a, y, 1.7);
    EXPECT_NEAR(back.p.coords.x, x.p.coords.x, 1e-9);
    EXPECT_NEAR(back.v.y, x.v.y, 1e-9);
  }
}

TEST(Flow, TimeReversalReturnsToStart) {
  const Atlas a = round_sphere_atlas();
  const TangentState x = make_state(a, at(-0.3, 4.0), 2.2);
  const TangentState y = flow(a, flow(a, x, 7.0), -7.0);
  EXPECT_NEAR(y.p.coords.x, x.p.coords.x, 1e-6);
  EXPECT_NEAR(y.p.coords.y, x.p.coords.y, 1e-6);
  EXPECT_NEAR(y.v.x, x.v.x, 1e-6);
  EXPECT_NEAR(y.v.y, x.v.y, 1e-6);
}

TEST(SasakiNorm, Examples) {
  EXPECT_EQ(sasaki_norm({1, 0}), 1.0);
  EXPECT_EQ(sasaki_norm({0, 0}), 0.0);
  EXPECT_EQ(sasaki_norm({3, 4}), 5.0);
}

TEST(ConjugatePoint, SphereAtPi) {
  const auto t = detect_conjugate_point(round_sphere_atlas(), equator_state(), 5.0);
  ASSERT_TRUE(t.has_value());
  EXPECT_NEAR(*t, kPi, 1e-6);
}

TEST(ConjugatePoint, NoneInFlatOrNegativeCurvature) {
  EXPECT_FALSE(detect_conjugate_point(flat_plane_atlas(), {at(0, 0), {1, 0}}, 50.0).has_value());
  EXPECT_FALSE(detect_conjugate_point(hyperbolic_cylinder_atlas(), waist_state(), 10.0).has_value());
  EXPECT_FALSE(detect_conjugate_point(round_sphere_atlas(), equator_state(), 3.0).has_value());
}
