#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "anosov/cone.hpp"
#include "anosov/disk_lattice.hpp"
#include "anosov/flow.hpp"
#include "anosov/model_space.hpp"
#include "anosov/tube_profile.hpp"

using namespace anosov;

namespace {

constexpr double kPi = std::numbers::pi;

ChartPoint bottom(double x, double y) { return {ChartId{ChartKind::PlaneBottom, 0}, {x, y}}; }
ModelOptions with_quotient(int a, int b) {
  ModelOptions o;
  o.quotient = {a, b};
  return o;
}

ChartPoint tube(int i, double t, double th) { return {ChartId{ChartKind::Tube, i}, {t, th}}; }

// Independent simple-Simpson oracle for the tube profile: integrates
// rho' = -1 + S from the collar inward using only the slope sum.
struct ProfileOracle {
  const TubeProfile& p;
  double rho(double t, int n = 20000) const {
    const double c = p.collar();
    if (t <= c) return p.attachment_radius() + c - t;
    const double h = (t - c) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double s = c + i * h;
      const double f = -1.0 + p.slope_sum((s - c) / p.interior_length());
      acc += (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0)) * f;
    }
    return p.attachment_radius() + acc * h / 3.0;
  }
};

}  // namespace

TEST(DiskLattice, RejectsOverlapAndBadRadius) {
  EXPECT_THROW(DiskLattice({{{0.5, 0.5}, 0.5}}), InvalidArgument);
  EXPECT_THROW(DiskLattice({{{0.5, 0.5}, 0.0}}), InvalidArgument);
  EXPECT_THROW(DiskLattice({{{1.0, 0.5}, 0.1}}), InvalidArgument);
  EXPECT_THROW(DiskLattice({{{0.2, 0.2}, 0.2}, {{0.5, 0.2}, 0.2}}), InvalidArgument);
  // Overlap only through a translate.
  EXPECT_THROW(DiskLattice({{{0.05, 0.5}, 0.2}, {{0.8, 0.5}, 0.2}}), InvalidArgument);
  EXPECT_NO_THROW(default_lattice());
}

TEST(DiskLattice, DisjointnessOverTranslates) {
  const DiskLattice lat = default_lattice();
  const auto& d = lat.disks();
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j)
      for (int dx = -2; dx <= 2; ++dx)
        for (int dy = -2; dy <= 2; ++dy) {
          if (i == j && dx == 0 && dy == 0) continue;
          const Vec2 c = d[j].center + Vec2{double(dx), double(dy)};
          EXPECT_GT(norm(c - d[i].center), d[i].radius + d[j].radius);
        }
}

TEST(Horizon, EmptyLatticeHasInfiniteHorizon) {
  const HorizonReport r = finite_horizon_bound(DiskLattice{}, 16, 16, 20.0);
  EXPECT_TRUE(r.violated);
  EXPECT_TRUE(std::isinf(r.bound_T));
  ASSERT_TRUE(r.corridor_witness.has_value());
}

TEST(Horizon, SingleSmallDiskHasHorizontalCorridor) {
  const DiskLattice lat({{{0.5, 0.5}, 0.2}});
  const HorizonReport r = finite_horizon_bound(lat, 32, 32, 50.0);
  EXPECT_TRUE(r.violated);
  ASSERT_TRUE(r.corridor_witness.has_value());
  const CorridorWitness& w = *r.corridor_witness;
  EXPECT_NEAR(w.angle, 0.0, 1e-12);
  EXPECT_NEAR(w.width, 0.6, 1e-12);
  // The corridor's central line y = offset (mod 1) lies in the free strip y in (0.7, 1.3).
  const double y = w.offset - std::floor(w.offset);
  EXPECT_TRUE(y > 0.7 || y < 0.3) << y;
  EXPECT_TRUE(std::isinf(first_entry_time(lat, {0.0, y}, {1.0, 0.0}, 1000.0)));
}

TEST(Horizon, EqualRadiusDiagonalPairLeavesDiagonalCorridor) {
  const DiskLattice lat({{{0.25, 0.25}, 0.26}, {{0.75, 0.75}, 0.26}});
  const HorizonReport r = finite_horizon_bound(lat, 64, 32, 50.0);
  EXPECT_TRUE(r.violated);
  ASSERT_TRUE(r.corridor_witness.has_value());
  EXPECT_NEAR(r.corridor_witness->angle, kPi / 4, 1e-12);
  const Vec2 d{std::cos(kPi / 4), std::sin(kPi / 4)};
  const Vec2 n{-d.y, d.x};
  EXPECT_TRUE(std::isinf(first_entry_time(lat, r.corridor_witness->offset * n, d, 1000.0)));
}

TEST(Horizon, DefaultLatticeIsFinite) {
  const HorizonReport r = finite_horizon_bound(default_lattice(), 64, 32, 50.0);
  EXPECT_FALSE(r.violated);
  EXPECT_FALSE(r.corridor_witness.has_value());
  EXPECT_GT(r.bound_T, 1.0);
  EXPECT_LT(r.bound_T, 3.0);
}

TEST(Horizon, FirstEntryMatchesClosedForm) {
  const DiskLattice lat({{{0.5, 0.5}, 0.2}});
  EXPECT_NEAR(first_entry_time(lat, {0.0, 0.5}, {1.0, 0.0}, 10.0), 0.3, 1e-14);
  // Starting below the disk, heading up.
  EXPECT_NEAR(first_entry_time(lat, {0.5, 0.1}, {0.0, 1.0}, 10.0), 0.2, 1e-14);
  // A ray just above the tangent line y = 0.7 misses the disk.
  EXPECT_TRUE(std::isinf(first_entry_time(lat, {0.0, 0.70001}, {1.0, 0.0}, 10.0)));
}

TEST(Horizon, EnlargingRadiusNeverIncreasesBound) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> grow(0.0, 0.04);
  double prev_r1 = 0.34, prev_r2 = 0.16;
  double prev = finite_horizon_bound(DiskLattice({{{0.25, 0.25}, prev_r1}, {{0.75, 0.75}, prev_r2}}), 32, 16, 50.0).bound_T;
  for (int k = 0; k < 4; ++k) {
    const double r1 = prev_r1 + grow(gen) * 0.5, r2 = prev_r2 + grow(gen) * 0.5;
    const double b = finite_horizon_bound(DiskLattice({{{0.25, 0.25}, r1}, {{0.75, 0.75}, r2}}), 32, 16, 50.0).bound_T;
    EXPECT_LE(b, prev + 1e-12);
    prev = b;
    prev_r1 = r1;
    prev_r2 = r2;
  }
}

TEST(Horizon, RejectsTooFewSamples) {
  EXPECT_THROW(finite_horizon_bound(default_lattice(), 4, 16, 10.0), InvalidArgument);
  EXPECT_THROW(finite_horizon_bound(default_lattice(), 16, 16, 0.0), InvalidArgument);
}

TEST(TubeProfile, InvariantsForSeveralRadii) {
  for (double ra : {0.12, 0.18, 0.26, 0.38}) {
    const TubeProfile p = build_tube_profile(ra, 0.15);
    const double L = p.length();
    EXPECT_NEAR(p.height(0.0), 0.0, 1e-15);
    EXPECT_NEAR(p.height(L), 1.0, 1e-8);
    EXPECT_NEAR(p.exact_derivs(0.0).drho, -1.0, 1e-15);
    EXPECT_NEAR(p.exact_derivs(L).drho, 1.0, 1e-15);
    EXPECT_LT(p.waist(), ra);
    EXPECT_NEAR(p.rho(0.5 * L), p.waist(), 1e-9);
    for (int i = 0; i <= 4000; ++i) {
      const double t = L * i / 4000.0;
      const auto d = p.exact_derivs(t);
      EXPECT_NEAR(d.drho * d.drho + p.dheight(t) * p.dheight(t), 1.0, 1e-12) << t;
      EXPECT_GE(d.d2rho, -1e-10) << t;
      EXPECT_LE(p.curvature(t), 1e-10) << t;
      EXPECT_NEAR(p.rho(L - t), p.rho(t), 1e-10) << t;
      if (t > p.collar() + 1e-9 && t < L - p.collar() - 1e-9) {
        EXPECT_GT(d.d2rho, 0.0) << t;
        EXPECT_LT(-d.d2rho / d.rho, 0.0) << t;
      }
    }
  }
}

TEST(TubeProfile, MatchesIndependentQuadratureAndFiniteDifferences) {
  const TubeProfile p = build_tube_profile(0.26, 0.15);
  const ProfileOracle oracle{p};
  const double L = p.length();
  for (double t : {0.02, 0.08, 0.2, 0.4, 0.55}) {
    EXPECT_NEAR(p.rho(t), oracle.rho(t), 1e-9) << t;
  }
  // Fundamental theorem of calculus on each of 50 panels, Gauss-Legendre with 8 nodes.
  static constexpr double x8[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static constexpr double w8[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  for (int i = 0; i < 50; ++i) {
    const double a = L * i / 50.0, b = L * (i + 1) / 50.0;
    double i1 = 0.0, i2 = 0.0, iw = 0.0;
    for (int sub = 0; sub < 64; ++sub) {
      const double lo = a + (b - a) * sub / 64.0, hh = (b - a) / 64.0;
      for (int q = 0; q < 8; ++q) {
        const double t = lo + 0.5 * hh + (q < 4 ? -1.0 : 1.0) * 0.5 * hh * x8[q % 4];
        const double wt = 0.5 * hh * w8[q % 4];
        const auto d = p.exact_derivs(t);
        i1 += wt * d.drho;
        i2 += wt * d.d2rho;
        iw += wt * p.dheight(t);
      }
    }
    EXPECT_NEAR(i1, p.rho(b) - p.rho(a), 1e-10) << a;
    EXPECT_NEAR(i2, p.exact_derivs(b).drho - p.exact_derivs(a).drho, 1e-10) << a;
    EXPECT_NEAR(iw, p.height(b) - p.height(a), 1e-10) << a;
  }
}

TEST(TubeProfile, SplineAgreesWithQuadrature) {
  const TubeProfile p = build_tube_profile(0.18, 0.15);
  for (int i = 0; i <= 3000; ++i) {
    const double t = p.length() * i / 3000.0;
    const auto a = p.derivs(t), b = p.exact_derivs(t);
    EXPECT_NEAR(a.rho, b.rho, 1e-11);
    EXPECT_NEAR(a.drho, b.drho, 1e-9);
    EXPECT_NEAR(a.d2rho, b.d2rho, 1e-6 * std::max(1.0, std::fabs(b.d2rho)));
  }
}

TEST(TubeProfile, RejectsInfeasibleInputs) {
  EXPECT_THROW(build_tube_profile(0.0, 0.15), InfeasibleProfile);
  EXPECT_THROW(build_tube_profile(-0.1, 0.15), InfeasibleProfile);
  EXPECT_THROW(build_tube_profile(0.26, 0.0), InfeasibleProfile);
  EXPECT_THROW(build_tube_profile(0.26, 1.0), InfeasibleProfile);
  // The waist would fall below a fifth of the attachment radius.
  EXPECT_THROW(build_tube_profile(0.05, 0.15), InfeasibleProfile);
}

TEST(ModelAtlas, DefaultQuotientHasTwoPlanesAndTwoTubes) {
  const Atlas a = assemble_model_atlas(default_lattice(), QuotientSpec{1, 1});
  EXPECT_EQ(a.count(ChartKind::PlaneBottom), 1u);
  EXPECT_EQ(a.count(ChartKind::PlaneTop), 1u);
  EXPECT_EQ(a.count(ChartKind::Tube), 2u);
  const Atlas b = assemble_model_atlas(default_lattice(), QuotientSpec{2, 1});
  EXPECT_EQ(b.count(ChartKind::Tube), 4u);
}

TEST(ModelAtlas, PlaneChartsAreExactlyFlat) {
  const Atlas a = assemble_model_atlas(default_lattice());
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const ChartPoint p = bottom(u(gen), u(gen));
    if (!a.chart(p.chart).contains(p.coords)) continue;
    EXPECT_EQ(gaussian_curvature(a, p), 0.0);
    const Sym2 g = metric_at(a, p);
    EXPECT_EQ(g.g11, 1.0);
    EXPECT_EQ(g.g12, 0.0);
    EXPECT_EQ(g.g22, 1.0);
    ++checked;
  }
  EXPECT_GT(checked, 500);
}

TEST(ModelAtlas, TubeCurvatureIsClosedForm) {
  const ModelSpace ms = build_model_space(default_lattice());
  for (int k = 0; k < 2; ++k) {
    const TubeProfile& p = *ms.profiles[k];
    for (int i = 0; i <= 200; ++i) {
      const double t = p.length() * i / 200.0;
      const double K = gaussian_curvature(ms.atlas, tube(k, t, 0.7));
      const auto d = p.exact_derivs(t);
      EXPECT_NEAR(K, -d.d2rho / d.rho, 1e-6);
      EXPECT_LE(K, 1e-10);
      const Sym2 g = metric_at(ms.atlas, tube(k, t, 0.7));
      EXPECT_NEAR(g.g11, 1.0, 1e-15);
      EXPECT_NEAR(g.g22, d.rho * d.rho, 1e-10);
    }
  }
}

TEST(ModelAtlas, JetMetricMatchesFastPath) {
  const ModelSpace ms = build_model_space(default_lattice());
  const Chart& c = ms.atlas.chart({ChartKind::Tube, 1});
  for (double t : {0.03, 0.2, 0.5, 0.9, 1.1}) {
    const MetricJet m = c.metric_jet({t, 1.3});
    const LocalGeometry fast = c.local_geometry({t, 1.3});
    const LocalGeometry slow = geometry_from_jet(m);
    EXPECT_NEAR(fast.g.g22, slow.g.g22, 1e-12);
    EXPECT_NEAR(fast.curvature, slow.curvature, 1e-6 * std::max(1.0, std::fabs(slow.curvature)));
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(fast.christoffel.gamma[k], slow.christoffel.gamma[k], 1e-9) << t << " " << k;
  }
}

TEST(ModelAtlas, CollarTransitionsAreIsometries) {
  const ModelSpace ms = build_model_space(default_lattice());
  const Disk d = ms.lattice.disks()[1];
  const TubeProfile& prof = *ms.profiles[1];
  const double c = prof.collar();
  for (ChartKind kind : {ChartKind::PlaneBottom, ChartKind::PlaneTop}) {
    for (double r : {d.radius + 0.2 * c, d.radius + 0.5 * c, d.radius + 0.9 * c}) {
      for (double th : {0.1, 2.0, 4.5}) {
        const ChartPoint p{ChartId{kind, 0}, d.center + r * Vec2{std::cos(th), std::sin(th)}};
        const Vec2 v{0.3, -0.8};
        const auto [q, w] = transition(ms.atlas, p, v);
        ASSERT_EQ(q.chart.kind, ChartKind::Tube);
        ASSERT_EQ(q.chart.index, 1);
        EXPECT_NEAR(q.coords.x, kind == ChartKind::PlaneBottom ? d.radius + c - r : prof.length() - (d.radius + c - r), 1e-12);
        const double len_p = std::sqrt(metric_at(ms.atlas, p).inner(v, v));
        const double len_q = std::sqrt(metric_at(ms.atlas, q).inner(w, w));
        EXPECT_NEAR(len_p, len_q, 1e-10);
        const auto [back, wb] = transition(ms.atlas, q, w);
        EXPECT_EQ(back.chart.kind, kind);
        EXPECT_NEAR(norm(DiskLattice::min_image(back.coords - p.coords)), 0.0, 1e-12);
        EXPECT_NEAR(wb.x, v.x, 1e-12);
        EXPECT_NEAR(wb.y, v.y, 1e-12);
      }
    }
  }
}

TEST(ModelAtlas, CollarMetricMatchesPolarFlatMetricToSecondOrder) {
  // On the collar the tube chart is the polar chart of the flat plane, so its
  // metric jet must agree with the flat metric written in polar coordinates.
  const ModelSpace ms = build_model_space(default_lattice());
  const TubeProfile& prof = *ms.profiles[0];
  const Chart& tc = ms.atlas.chart({ChartKind::Tube, 0});
  const double ra = prof.attachment_radius(), c = prof.collar();
  for (double t : {0.0, 0.25 * c, 0.5 * c, 0.999 * c, prof.length() - 0.5 * c}) {
    const double tt = std::min(t, prof.length() - t);
    const double r = ra + c - tt;
    const MetricJet m = tc.metric_jet({t, 0.4});
    EXPECT_NEAR(m.g.g22, r * r, 1e-12);
    EXPECT_NEAR(std::fabs(m.dg[0].g22), 2 * r, 1e-9);
    EXPECT_NEAR(m.d2g[0].g22, 2.0, 1e-6);
    EXPECT_NEAR(m.g.g11, 1.0, 1e-15);
    EXPECT_NEAR(gaussian_curvature(ms.atlas, tube(0, t, 0.4)), 0.0, 1e-9);
  }
}

TEST(ModelAtlas, StraightLineThroughCollarStaysStraight) {
  const ModelSpace ms = build_model_space(default_lattice());
  const Disk d = ms.lattice.disks()[0];
  const double c = ms.profiles[0]->collar();
  // A chord that dips to distance r + 0.3 c from the center, inside the collar
  // but outside the handoff circle only at its ends.
  const double dist = d.radius + 0.3 * c;
  const Vec2 start = d.center + Vec2{-0.1, -dist};
  const TangentState x{bottom(start.x, start.y), {1.0, 0.0}};
  const TangentState y = flow(ms.atlas, x, 0.2);
  ASSERT_EQ(y.p.chart.kind, ChartKind::PlaneBottom);
  EXPECT_NEAR(y.p.coords.x, start.x + 0.2, 1e-9);
  EXPECT_NEAR(std::remainder(y.p.coords.y - start.y, 1.0), 0.0, 1e-9);
  EXPECT_NEAR(y.v.x, 1.0, 1e-9);
}

TEST(ModelAtlas, ClairautOnTube) {
  const ModelSpace ms = build_model_space(default_lattice());
  const TubeProfile& p = *ms.profiles[0];
  const TangentState x = make_state(ms.atlas, tube(0, 0.5 * p.length(), 0.0), 0.6);
  const double clairaut = p.waist() * p.waist() * x.v.y;
  const FlowSegment seg = integrate_geodesic(ms.atlas, x, 4.0);
  int on_tube = 0;
  for (const FlowSample& s : seg.samples) {
    if (s.state.p.chart.kind != ChartKind::Tube || s.state.p.chart.index != 0) break;
    const double r = p.rho(s.state.p.coords.x);
    EXPECT_NEAR(r * r * s.state.v.y, clairaut, 1e-7);
    ++on_tube;
  }
  EXPECT_GT(on_tube, 20);
}

TEST(ModelAtlas, GeodesicsCrossFromPlaneToPlane) {
  const ModelSpace ms = build_model_space(default_lattice());
  const Disk d = ms.lattice.disks()[0];
  // Aim radially into the large disk.
  const Vec2 start = d.center + Vec2{d.radius + 0.1, 0.0};
  const TangentState x{bottom(start.x, start.y), {-1.0, 0.0}};
  const double L = ms.profiles[0]->length();
  const TangentState y = flow(ms.atlas, x, 0.1 + L + 0.05);
  EXPECT_EQ(y.p.chart.kind, ChartKind::PlaneTop);
  // The meridian theta = 0 returns on the same side, now heading outward.
  const Vec2 expect = d.center + Vec2{d.radius + 0.15, 0.0};
  EXPECT_NEAR(norm(DiskLattice::min_image(y.p.coords - expect)), 0.0, 1e-7);
  EXPECT_NEAR(y.v.x, 1.0, 1e-7);
}

TEST(ModelAtlas, UnitDeterminantOfLinearizedFlow) {
  const ModelSpace ms = build_model_space(default_lattice());
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int done = 0;
  while (done < 10) {
    const ChartPoint p = bottom(u(gen), u(gen));
    if (!ms.atlas.chart(p.chart).contains(p.coords)) continue;
    const TangentState x = make_state(ms.atlas, p, 2 * kPi * u(gen));
    const Mat2 m = dphi_perp(ms.atlas, x, 5.0);
    const double scale = std::fabs(m.a * m.d) + std::fabs(m.b * m.c);
    EXPECT_NEAR(m.det(), 1.0, 1e-9 * std::max(1.0, scale));
    ++done;
  }
}

TEST(ModelAtlas, BlockwiseDeterminantIsOneUpToTwenty) {
  const ModelSpace ms = build_model_space(default_lattice());
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int done = 0;
  while (done < 40) {
    const ChartPoint p = bottom(u(gen), u(gen));
    if (!ms.atlas.chart(p.chart).contains(p.coords)) continue;
    const TangentState x = make_state(ms.atlas, p, 2 * kPi * u(gen));
    const double T = 20.0 * u(gen);
    EXPECT_NEAR(dphi_perp_determinant(ms.atlas, x, T), 1.0, 1e-6) << "T = " << T;
    ++done;
  }
  EXPECT_THROW(dphi_perp_determinant(ms.atlas, make_state(ms.atlas, bottom(0.6, 0.1), 0.0), -1.0), InvalidArgument);
}

TEST(ModelAtlas, QuotientLiftConsistency) {
  // The two quotients store the same orbit in coordinates that differ by
  // integer shifts, so their roundoff differs at the 1e-16 level and is then
  // amplified by the linearized flow. The agreement bound is 1e-8 or that
  // amplification applied to 1e-12, whichever is larger.
  const ModelSpace small = build_model_space(default_lattice(), with_quotient(1, 1));
  const ModelSpace big = build_model_space(default_lattice(), with_quotient(2, 2));
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int done = 0, strict = 0;
  while (done < 8) {
    const ChartPoint p = bottom(u(gen), u(gen));
    if (!small.atlas.chart(p.chart).contains(p.coords)) continue;
    const double ang = 2 * kPi * u(gen);
    for (double T : {2.0, 5.0, 10.0}) {
      const TangentState xs = make_state(small.atlas, p, ang);
      const TangentState a = flow(small.atlas, xs, T);
      const TangentState b = flow(big.atlas, make_state(big.atlas, p, ang), T);
      const Mat2 m = dphi_perp(small.atlas, xs, T);
      const double amp = std::max({std::fabs(m.a), std::fabs(m.b), std::fabs(m.c), std::fabs(m.d)});
      const double tol = std::max(1e-8, 1e-12 * amp);
      if (tol == 1e-8) ++strict;
      ASSERT_EQ(a.p.chart.kind, b.p.chart.kind);
      if (a.p.chart.kind == ChartKind::Tube) {
        EXPECT_EQ(a.p.chart.index, b.p.chart.index % 2);
        EXPECT_NEAR(a.p.coords.x, b.p.coords.x, tol);
        EXPECT_NEAR(std::remainder(a.p.coords.y - b.p.coords.y, 2 * kPi), 0.0, tol);
      } else {
        EXPECT_NEAR(norm(DiskLattice::min_image(a.p.coords - b.p.coords)), 0.0, tol);
      }
      EXPECT_NEAR(a.v.x, b.v.x, tol);
      EXPECT_NEAR(a.v.y, b.v.y, tol);
    }
    ++done;
  }
  EXPECT_GE(strict, 8);
}

TEST(ModelAtlas, QuotientTubeIndexing) {
  const ModelSpace big = build_model_space(default_lattice(), with_quotient(2, 3));
  const auto& disks = big.lattice.disks();
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) {
        const auto& t = dynamic_cast<const TubeChart&>(big.atlas.chart({ChartKind::Tube, (j * 2 + i) * 2 + k}));
        EXPECT_NEAR(norm(t.center() - (disks[k].center + Vec2{double(i), double(j)})), 0.0, 1e-15);
      }
}

TEST(GaussBonnet, FlatTorusIsZero) {
  EXPECT_EQ(gauss_bonnet_integral(assemble_model_atlas(DiskLattice{})), 0.0);
}

TEST(GaussBonnet, DefaultLatticeGenusThree) {
  const Atlas a = assemble_model_atlas(default_lattice(), QuotientSpec{1, 1});
  const double gb = gauss_bonnet_integral(a);
  EXPECT_NEAR(gb / (2 * kPi * (2 - 2 * 3)), 1.0, 0.01);
  // Refinement oracle.
  EXPECT_NEAR(gauss_bonnet_integral(a, 512), gb, 1e-6 * std::fabs(gb));
}

TEST(GaussBonnet, QuotientTwoByOne) {
  const Atlas a = assemble_model_atlas(default_lattice(), QuotientSpec{2, 1});
  EXPECT_NEAR(gauss_bonnet_integral(a) / (-16 * kPi), 1.0, 0.01);
}

TEST(GaussBonnet, PerturbedMetricKeepsTotalCurvature) {
  ModelOptions opt;
  opt.plane_bump = default_plane_bump(default_lattice(), opt.profile.collar, 0.05);
  opt.tube_bump = 0.05;
  const ModelSpace ms = build_model_space(default_lattice(), opt);
  EXPECT_NEAR(gauss_bonnet_integral(ms.atlas, 256, 64, 256) / (-8 * kPi), 1.0, 0.01);
}

TEST(QuotientGenus, Examples) {
  EXPECT_EQ(quotient_genus({1, 1}, 2), 3);
  EXPECT_EQ(quotient_genus({2, 3}, 2), 13);
  EXPECT_EQ(quotient_genus({1, 1}, 1), 2);
  EXPECT_THROW(quotient_genus({0, 1}, 2), InvalidArgument);
  EXPECT_EQ(build_model_space(default_lattice(), with_quotient(2, 3)).genus(), 13);
}

TEST(ModelSpace, RejectsBadOptions) {
  EXPECT_THROW(build_model_space(DiskLattice({{{0.5, 0.5}, 0.47}})), InvalidArgument);
  EXPECT_THROW(build_model_space(default_lattice(), with_quotient(0, 1)), InvalidArgument);
  ModelOptions opt;
  opt.plane_bump = PlaneBump{{0.25, 0.25}, 0.1, 0.1};
  EXPECT_THROW(build_model_space(default_lattice(), opt), InvalidArgument);
  ModelOptions opt2;
  opt2.tube_bump = -1.5;
  EXPECT_THROW(build_model_space(default_lattice(), opt2), InvalidArgument);
}
