#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anosov/errors.hpp"
#include "anosov/jet.hpp"
#include "anosov/linalg.hpp"

namespace anosov {

enum class ChartKind { PlaneBottom, PlaneTop, Tube, Generic };

inline const char* to_string(ChartKind k) {
  switch (k) {
    case ChartKind::PlaneBottom: return "plane_bottom";
    case ChartKind::PlaneTop: return "plane_top";
    case ChartKind::Tube: return "tube";
    case ChartKind::Generic: return "generic";
  }
  return "unknown";
}

struct ChartId {
  ChartKind kind = ChartKind::Generic;
  int index = 0;

  auto operator<=>(const ChartId&) const = default;
};

inline std::string to_string(ChartId id) { return std::string(to_string(id.kind)) + ":" + std::to_string(id.index); }

struct ChartPoint {
  ChartId chart;
  Vec2 coords;
};

/// Metric entries and their first and second coordinate derivatives.
/// dg[i] = d/dx^i, d2g = {d11, d12, d22}.
struct MetricJet {
  Sym2 g;
  std::array<Sym2, 2> dg{};
  std::array<Sym2, 3> d2g{};
};

/// Christoffel symbols Gamma^k_ij stored as gamma[3*k + s] with s = 0 (11), 1 (12), 2 (22).
struct Christoffel {
  std::array<double, 6> gamma{};

  double operator()(int k, int i, int j) const {
    const int s = (i == 0 && j == 0) ? 0 : (i == 1 && j == 1) ? 2 : 1;
    return gamma[3 * k + s];
  }
  /// Geodesic acceleration -Gamma^k_ij v^i v^j.
  Vec2 acceleration(Vec2 v) const {
    const double vv[3] = {v.x * v.x, 2.0 * v.x * v.y, v.y * v.y};
    return {-(gamma[0] * vv[0] + gamma[1] * vv[1] + gamma[2] * vv[2]),
            -(gamma[3] * vv[0] + gamma[4] * vv[1] + gamma[5] * vv[2])};
  }
};

/// Everything the geodesic/Jacobi right-hand side needs at one point.
struct LocalGeometry {
  Sym2 g;
  Christoffel christoffel;
  double curvature = 0.0;
};

inline Christoffel christoffel_from_jet(const MetricJet& m) {
  const Sym2 gi = m.g.inverse();
  // first-kind symbols [ij, l] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
  auto first_kind = [&](int i, int j, int l) {
    return 0.5 * (m.dg[i](j, l) + m.dg[j](i, l) - m.dg[l](i, j));
  };
  Christoffel c;
  const int pairs[3][2] = {{0, 0}, {0, 1}, {1, 1}};
  for (int k = 0; k < 2; ++k) {
    for (int s = 0; s < 3; ++s) {
      const int i = pairs[s][0], j = pairs[s][1];
      c.gamma[3 * k + s] = gi(k, 0) * first_kind(i, j, 0) + gi(k, 1) * first_kind(i, j, 1);
    }
  }
  return c;
}

/// Gaussian curvature by the Brioschi formula.
inline double brioschi_curvature(const MetricJet& m) {
  const double E = m.g.g11, F = m.g.g12, G = m.g.g22;
  const double Eu = m.dg[0].g11, Ev = m.dg[1].g11;
  const double Fu = m.dg[0].g12, Fv = m.dg[1].g12;
  const double Gu = m.dg[0].g22, Gv = m.dg[1].g22;
  const double Evv = m.d2g[2].g11, Fuv = m.d2g[1].g12, Guu = m.d2g[0].g22;
  auto det3 = [](const double a[3][3]) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  const double A[3][3] = {{-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev},
                          {Fv - 0.5 * Gu, E, F},
                          {0.5 * Gv, F, G}};
  const double B[3][3] = {{0.0, 0.5 * Ev, 0.5 * Gu}, {0.5 * Ev, E, F}, {0.5 * Gu, F, G}};
  const double w = E * G - F * F;
  return (det3(A) - det3(B)) / (w * w);
}

inline LocalGeometry geometry_from_jet(const MetricJet& m) {
  return {m.g, christoffel_from_jet(m), brioschi_curvature(m)};
}

/// Evaluates a metric written as `template <class S> std::array<S,3> f(S x1, S x2)`
/// with exact derivatives through Jet.
template <class MetricFn>
MetricJet metric_jet_of(const MetricFn& f, Vec2 p) {
  const Jet x = Jet::variable(p.x, 0), y = Jet::variable(p.y, 1);
  const std::array<Jet, 3> e = f(x, y);
  MetricJet m;
  m.g = {e[0].v, e[1].v, e[2].v};
  for (int i = 0; i < 2; ++i) m.dg[i] = {e[0].d[i], e[1].d[i], e[2].d[i]};
  for (int k = 0; k < 3; ++k) m.d2g[k] = {e[0].h[k], e[1].h[k], e[2].h[k]};
  return m;
}

/// Central finite-difference metric jet with step h (fallback path).
template <class MetricValueFn>
MetricJet metric_jet_fd(const MetricValueFn& g, Vec2 p, double h = 1e-5) {
  auto at = [&](double dx, double dy) { return g(Vec2{p.x + dx, p.y + dy}); };
  const Sym2 c = at(0, 0);
  const Sym2 xp = at(h, 0), xm = at(-h, 0), yp = at(0, h), ym = at(0, -h);
  const Sym2 pp = at(h, h), pm = at(h, -h), mp = at(-h, h), mm = at(-h, -h);
  auto lin = [](Sym2 a, double sa, Sym2 b, double sb) { return sa * a + sb * b; };
  MetricJet m;
  m.g = c;
  m.dg[0] = (0.5 / h) * lin(xp, 1.0, xm, -1.0);
  m.dg[1] = (0.5 / h) * lin(yp, 1.0, ym, -1.0);
  const double ih2 = 1.0 / (h * h);
  m.d2g[0] = ih2 * (xp + xm + (-2.0) * c);
  m.d2g[2] = ih2 * (yp + ym + (-2.0) * c);
  m.d2g[1] = (0.25 * ih2) * (pp + mm + (-1.0) * pm + (-1.0) * mp);
  return m;
}

/// Axis-aligned parameter box used for phase-space sampling.
struct Box {
  Vec2 lo;
  Vec2 hi;
};

/// Result of re-expressing a point and tangent vector in an adjacent chart.
struct Handoff {
  ChartId target;
  Vec2 p;
  Vec2 v;
  /// The transition reverses orientation, so the unit normal (and with it
  /// all perpendicular Jacobi data) changes sign.
  bool flips_orientation = false;
};

/// A straight segment the flow may take analytically (exactly Euclidean region).
struct FlatRun {
  double length = 0.0;
  bool ends_in_handoff = false;
};

/// One coordinate chart of a surface.
///
/// Besides the metric, a chart exposes what the flow integrator needs to move
/// between charts: a handoff margin that turns negative past the midpoint of
/// an overlap collar, the transition map itself, and periodic
/// canonicalization of coordinates.
class Chart {
 public:
  explicit Chart(ChartId id) : id_(id) {}
  virtual ~Chart() = default;

  ChartId id() const { return id_; }

  /// Domain membership, including overlap collars.
  virtual bool contains(Vec2 p) const = 0;
  virtual MetricJet metric_jet(Vec2 p) const = 0;
  virtual Sym2 metric(Vec2 p) const { return metric_jet(p).g; }
  virtual LocalGeometry local_geometry(Vec2 p) const { return geometry_from_jet(metric_jet(p)); }

  /// Parameter box for phase-space sampling; sample points are filtered by `owns`.
  virtual Box parameter_box() const = 0;
  /// Points this chart is responsible for when sampling or integrating over a
  /// fundamental domain (collars are split at their midlines).
  virtual bool owns(Vec2 p) const { return contains(p); }

  virtual Vec2 canonicalize(Vec2 p) const { return p; }
  /// Positive while the flow should stay in this chart.
  virtual double handoff_margin(Vec2) const { return std::numeric_limits<double>::infinity(); }
  /// Re-expresses (p, v) in the adjacent chart when p lies in an overlap collar.
  virtual std::optional<Handoff> overlap_transition(Vec2, Vec2) const { return std::nullopt; }
  /// When the metric is exactly Euclidean around p, how far the straight line
  /// through p with unit velocity v may be followed analytically.
  virtual std::optional<FlatRun> flat_run(Vec2, Vec2, double) const { return std::nullopt; }

 private:
  ChartId id_;
};

/// Immutable collection of charts. Shareable across threads once built.
class Atlas {
 public:
  void add(std::shared_ptr<const Chart> chart) {
    const ChartId id = chart->id();
    if (index_.count(id)) throw InvalidArgument("duplicate chart " + to_string(id));
    index_[id] = charts_.size();
    charts_.push_back(std::move(chart));
  }

  std::size_t size() const { return charts_.size(); }
  const Chart& operator[](std::size_t i) const { return *charts_[i]; }
  const std::vector<std::shared_ptr<const Chart>>& charts() const { return charts_; }

  bool has(ChartId id) const { return index_.count(id) != 0; }
  const Chart& chart(ChartId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw OutOfDomain("no chart " + to_string(id) + " in atlas");
    return *charts_[it->second];
  }
  std::size_t count(ChartKind kind) const {
    std::size_t n = 0;
    for (const auto& c : charts_) n += c->id().kind == kind ? 1 : 0;
    return n;
  }

 private:
  std::vector<std::shared_ptr<const Chart>> charts_;
  std::map<ChartId, std::size_t> index_;
};

inline constexpr double kSpdTolerance = 1e-14;

inline const Chart& checked_chart(const Atlas& atlas, const ChartPoint& p) {
  const Chart& c = atlas.chart(p.chart);
  if (!c.contains(p.coords)) {
    throw OutOfDomain("point (" + std::to_string(p.coords.x) + ", " + std::to_string(p.coords.y) +
                      ") outside chart " + to_string(p.chart));
  }
  return c;
}

inline Sym2 metric_at(const Atlas& atlas, const ChartPoint& p) {
  const Sym2 g = checked_chart(atlas, p).metric(p.coords);
  const auto ev = g.eigenvalues();
  if (!(ev[0] > kSpdTolerance * std::fmax(1.0, ev[1]))) {
    throw NotPositiveDefinite("metric not positive definite in chart " + to_string(p.chart));
  }
  return g;
}

inline Christoffel christoffel(const Atlas& atlas, const ChartPoint& p) {
  return checked_chart(atlas, p).local_geometry(p.coords).christoffel;
}

inline double gaussian_curvature(const Atlas& atlas, const ChartPoint& p) {
  return checked_chart(atlas, p).local_geometry(p.coords).curvature;
}

/// Same point and tangent vector expressed in the adjacent chart.
inline std::pair<ChartPoint, Vec2> transition(const Atlas& atlas, const ChartPoint& p, Vec2 vec) {
  const Chart& c = checked_chart(atlas, p);
  const auto h = c.overlap_transition(p.coords, vec);
  if (!h) throw NoOverlap("point is not in any overlap of chart " + to_string(p.chart));
  return {ChartPoint{h->target, h->p}, h->v};
}

/// Unit vector at angle `angle` measured in a g-orthonormal frame whose first
/// axis is along the first coordinate direction.
inline Vec2 unit_vector_at_angle(const Sym2& g, double angle) {
  const Vec2 e1{1.0 / std::sqrt(g.g11), 0.0};
  Vec2 e2{0.0, 1.0};
  e2 -= g.inner(e2, e1) * e1;
  e2 = e2 / std::sqrt(g.inner(e2, e2));
  return std::cos(angle) * e1 + std::sin(angle) * e2;
}

/// Unit normal n with (v, n) positively oriented, n = J v / |.|, for unit v.
inline Vec2 unit_normal(const Sym2& g, Vec2 v) {
  // n^k = eps^{k l} g_{l m} v^m / sqrt(det g)
  const Vec2 gv = g.apply(v);
  return Vec2{-gv.y, gv.x} / std::sqrt(g.det());
}

}  // namespace anosov
