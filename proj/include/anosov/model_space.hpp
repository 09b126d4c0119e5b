#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anosov/chart.hpp"
#include "anosov/disk_lattice.hpp"
#include "anosov/errors.hpp"
#include "anosov/jet.hpp"
#include "anosov/pullback.hpp"
#include "anosov/tube_profile.hpp"

namespace anosov {

/// Sublattice a Z x b Z by which the model surface is divided.
struct QuotientSpec {
  int a = 1;
  int b = 1;
};

inline int quotient_genus(const QuotientSpec& q, int disks_per_cell) {
  if (q.a < 1 || q.b < 1 || disks_per_cell < 1) throw InvalidArgument("quotient_genus inputs must be >= 1");
  return disks_per_cell * q.a * q.b + 1;
}

/// Compactly supported C-infinity bump with peak 1 at s = 0, zero for |s| >= 1.
template <class S>
S bump_profile(const S& s2) {
  using std::exp;
  if (value_of(s2) >= 1.0) return S(0.0);
  return exp(1.0 - 1.0 / (1.0 - s2));
}

/// Conformal factor 1 + amplitude * bump(|x - center| / radius) repeated in every unit cell.
struct PlaneBump {
  Vec2 center;
  double radius = 0.0;
  double amplitude = 0.0;
};

struct ModelOptions {
  ProfileParams profile;
  QuotientSpec quotient;
  std::optional<PlaneBump> plane_bump;
  /// Amplitude of a rotationally symmetric conformal bump on the curved band of every tube.
  double tube_bump = 0.0;
  /// When set, chart metrics are the ones induced by the nested-tori map with these radii.
  std::optional<EmbeddingParams> immersion;
};

namespace detail {

inline double wrap_period(double x, double period) {
  double r = std::fmod(x, period);
  if (r < 0.0) r += period;
  if (r >= period) r = 0.0;
  return r;
}

inline double wrap_angle(double th) { return wrap_period(th, 2.0 * std::numbers::pi); }

/// First time the ray p + s d (|d| = 1) enters one of the unit-periodic circles,
/// ignoring circles the ray is currently leaving. Returns (time, circle index).
inline std::pair<double, int> first_circle_entry(const std::vector<Disk>& circles, Vec2 p, Vec2 d, double t_max) {
  const double inf = std::numeric_limits<double>::infinity();
  if (circles.empty()) return {inf, -1};
  long cx = static_cast<long>(std::floor(p.x)), cy = static_cast<long>(std::floor(p.y));
  const int sx = d.x > 0 ? 1 : -1, sy = d.y > 0 ? 1 : -1;
  double next_x = d.x != 0.0 ? ((d.x > 0 ? cx + 1.0 : double(cx)) - p.x) / d.x : inf;
  double next_y = d.y != 0.0 ? ((d.y > 0 ? cy + 1.0 : double(cy)) - p.y) / d.y : inf;
  const double step_x = d.x != 0.0 ? std::fabs(1.0 / d.x) : inf;
  const double step_y = d.y != 0.0 ? std::fabs(1.0 / d.y) : inf;
  double best = inf;
  int best_idx = -1;
  for (;;) {
    for (long ix = cx - 1; ix <= cx + 1; ++ix) {
      for (long iy = cy - 1; iy <= cy + 1; ++iy) {
        for (std::size_t k = 0; k < circles.size(); ++k) {
          const Vec2 q = p - (circles[k].center + Vec2{double(ix), double(iy)});
          const double b = dot(q, d);
          const double c = dot(q, q) - circles[k].radius * circles[k].radius;
          const double disc = b * b - c;
          if (disc <= 0.0) continue;
          double t1;
          if (c <= 0.0) {
            if (b >= 0.0) continue;  // inside or on the circle and moving out
            t1 = 0.0;
          } else {
            if (b >= 0.0) continue;  // outside and moving away
            t1 = -b - std::sqrt(disc);
          }
          if (t1 < best) {
            best = t1;
            best_idx = static_cast<int>(k);
          }
        }
      }
    }
    const double exit = std::min(next_x, next_y);
    if (best <= exit || exit > t_max) return {best, best_idx};
    if (next_x < next_y) {
      cx += sx;
      next_x += step_x;
    } else {
      cy += sy;
      next_y += step_y;
    }
  }
}

}  // namespace detail

/// One of the two planes w = 0 (bottom) and w = 1 (top), periodic with
/// periods (a, b), with the open disks of the lattice removed. The chart
/// also covers the collar annuli r_k <= |p - c_k| <= r_k + collar, where it
/// overlaps the tubes.
class PlaneChart final : public Chart {
 public:
  PlaneChart(ChartKind kind, const DiskLattice& lattice, const std::vector<std::shared_ptr<const TubeProfile>>& profiles,
             const ModelOptions& opt)
      : Chart(ChartId{kind, 0}),
        lattice_(lattice),
        profiles_(profiles),
        a_(opt.quotient.a),
        b_(opt.quotient.b),
        collar_(opt.profile.collar),
        bump_(opt.plane_bump),
        immersion_(opt.immersion),
        height_(kind == ChartKind::PlaneTop ? 1.0 : 0.0) {
    for (const Disk& d : lattice_.disks()) handoff_circles_.push_back({d.center, d.radius + 0.5 * collar_});
    flat_circles_ = handoff_circles_;
    if (bump_ && bump_->amplitude != 0.0) flat_circles_.push_back({bump_->center, bump_->radius});
  }

  bool flat() const { return !immersion_ && !(bump_ && bump_->amplitude != 0.0); }
  double height() const { return height_; }
  int period_a() const { return a_; }
  int period_b() const { return b_; }

  bool contains(Vec2 p) const override {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
    for (const Disk& d : lattice_.disks()) {
      if (norm(DiskLattice::min_image(p - d.center)) < d.radius * (1.0 - 1e-12)) return false;
    }
    return true;
  }

  template <class S>
  std::array<S, 3> metric_entries(const S& x, const S& y) const {
    S g11(1.0), g22(1.0);
    if (immersion_) {
      g11 = pullback_q11(*immersion_, y, S(height_));
      g22 = pullback_q22(*immersion_, S(height_));
    }
    if (bump_ && bump_->amplitude != 0.0) {
      const double ox = value_of(x) - bump_->center.x, oy = value_of(y) - bump_->center.y;
      const S dx = x - (bump_->center.x + std::round(ox)), dy = y - (bump_->center.y + std::round(oy));
      const S phi = 1.0 + bump_->amplitude * bump_profile((dx * dx + dy * dy) / (bump_->radius * bump_->radius));
      g11 = g11 * phi;
      g22 = g22 * phi;
    }
    return {g11, S(0.0), g22};
  }

  MetricJet metric_jet(Vec2 p) const override {
    if (flat()) return MetricJet{{1.0, 0.0, 1.0}, {}, {}};
    return metric_jet_of([this](const auto& x, const auto& y) { return metric_entries(x, y); }, p);
  }
  Sym2 metric(Vec2 p) const override {
    if (flat()) return {1.0, 0.0, 1.0};
    const auto e = metric_entries(p.x, p.y);
    return {e[0], e[1], e[2]};
  }
  LocalGeometry local_geometry(Vec2 p) const override {
    if (flat()) return LocalGeometry{{1.0, 0.0, 1.0}, {}, 0.0};
    return geometry_from_jet(metric_jet(p));
  }

  Box parameter_box() const override { return {{0.0, 0.0}, {double(a_), double(b_)}}; }
  bool owns(Vec2 p) const override { return contains(p) && handoff_margin(p) >= 0.0; }

  Vec2 canonicalize(Vec2 p) const override { return {detail::wrap_period(p.x, a_), detail::wrap_period(p.y, b_)}; }

  double handoff_margin(Vec2 p) const override {
    double m = std::numeric_limits<double>::infinity();
    for (const Disk& d : lattice_.disks()) {
      m = std::min(m, norm(DiskLattice::min_image(p - d.center)) - (d.radius + 0.5 * collar_));
    }
    return m;
  }

  std::optional<Handoff> overlap_transition(Vec2 p, Vec2 v) const override {
    const auto& disks = lattice_.disks();
    for (std::size_t k = 0; k < disks.size(); ++k) {
      const Vec2 q = DiskLattice::min_image(p - disks[k].center);
      const double r = norm(q);
      if (!(r < disks[k].radius + collar_) || r < disks[k].radius * (1.0 - 1e-12)) continue;
      const Vec2 hole = p - q;
      const long i = std::lround(hole.x - disks[k].center.x), j = std::lround(hole.y - disks[k].center.y);
      const int ci = static_cast<int>(((i % a_) + a_) % a_), cj = static_cast<int>(((j % b_) + b_) % b_);
      const int tube = (cj * a_ + ci) * static_cast<int>(disks.size()) + static_cast<int>(k);
      const TubeProfile& prof = *profiles_[k];
      const double depth_in = disks[k].radius + collar_ - r;
      const double dr = dot(q, v) / r;
      const double dth = cross(q, v) / (r * r);
      Handoff h;
      h.target = ChartId{ChartKind::Tube, tube};
      if (id().kind == ChartKind::PlaneBottom) {
        h.p = {depth_in, detail::wrap_angle(std::atan2(q.y, q.x))};
        h.v = {-dr, dth};
        h.flips_orientation = true;
      } else {
        h.p = {prof.length() - depth_in, detail::wrap_angle(std::atan2(q.y, q.x))};
        h.v = {dr, dth};
      }
      return h;
    }
    return std::nullopt;
  }

  std::optional<FlatRun> flat_run(Vec2 p, Vec2 v, double remaining) const override {
    if (immersion_) return std::nullopt;
    if (bump_ && bump_->amplitude != 0.0) {
      if (norm(DiskLattice::min_image(p - bump_->center)) <= bump_->radius) return std::nullopt;
    }
    const auto [t, idx] = detail::first_circle_entry(flat_circles_, p, v, remaining);
    if (!(t < remaining)) return FlatRun{remaining, false};
    return FlatRun{t, idx < static_cast<int>(handoff_circles_.size())};
  }

 private:
  DiskLattice lattice_;
  std::vector<std::shared_ptr<const TubeProfile>> profiles_;
  int a_, b_;
  double collar_;
  std::optional<PlaneBump> bump_;
  std::optional<EmbeddingParams> immersion_;
  double height_;
  std::vector<Disk> handoff_circles_;
  std::vector<Disk> flat_circles_;
};

/// Surface of revolution joining the bottom plane to the top plane over one
/// lattice disk, in arclength/angle coordinates (t, theta), t in [0, L].
class TubeChart final : public Chart {
 public:
  TubeChart(int index, std::shared_ptr<const TubeProfile> profile, Vec2 center, const ModelOptions& opt)
      : Chart(ChartId{ChartKind::Tube, index}),
        profile_(std::move(profile)),
        center_(center),
        a_(opt.quotient.a),
        b_(opt.quotient.b),
        bump_(opt.tube_bump),
        immersion_(opt.immersion) {
    const double L = profile_->length(), c = profile_->collar();
    bump_half_width_ = 0.8 * (0.5 * L - c);
  }

  const TubeProfile& profile() const { return *profile_; }
  Vec2 center() const { return center_; }
  bool plain() const { return !immersion_ && bump_ == 0.0; }

  bool contains(Vec2 p) const override {
    return p.x >= 0.0 && p.x <= profile_->length() && std::isfinite(p.y);
  }

  /// Embedding coordinates (u, v, w) of a chart point.
  std::array<double, 3> immersion_point(Vec2 p) const {
    const double r = profile_->rho(p.x);
    return {center_.x + r * std::cos(p.y), center_.y + r * std::sin(p.y), profile_->height(p.x)};
  }

  double conformal_factor(double t) const {
    if (bump_ == 0.0) return 1.0;
    const double s = (t - 0.5 * profile_->length()) / bump_half_width_;
    return 1.0 + bump_ * bump_profile(s * s);
  }

  MetricJet metric_jet(Vec2 p) const override {
    const Jet T = Jet::variable(p.x, 0), Th = Jet::variable(p.y, 1);
    const auto r = profile_->rho_derivs3(p.x);
    const Jet R = T.compose(r[0], r[1], r[2]);
    std::array<Jet, 3> g;
    if (!immersion_) {
      g = {Jet(1.0), Jet(0.0), R * R};
    } else {
      const auto w = profile_->height_derivs3(p.x);
      const Jet R1 = T.compose(r[1], r[2], r[3]);
      const Jet W = T.compose(w[0], w[1], w[2]);
      const Jet W1 = T.compose(w[1], w[2], w[3]);
      const Jet c = cos(Th), s = sin(Th);
      const Jet V = center_.y + R * s;
      const Jet q11 = pullback_q11(*immersion_, V, W), q22 = pullback_q22(*immersion_, W);
      const Jet ut = R1 * c, uth = -1.0 * R * s, vt = R1 * s, vth = R * c;
      g = {q11 * ut * ut + q22 * vt * vt + W1 * W1, q11 * ut * uth + q22 * vt * vth, q11 * uth * uth + q22 * vth * vth};
    }
    if (bump_ != 0.0) {
      const double s0 = (p.x - 0.5 * profile_->length()) / bump_half_width_;
      const Jet S = (T - 0.5 * profile_->length()) / bump_half_width_;
      const Jet phi = std::fabs(s0) < 1.0 ? 1.0 + bump_ * bump_profile(S * S) : Jet(1.0);
      for (auto& e : g) e = e * phi;
    }
    MetricJet m;
    m.g = {g[0].v, g[1].v, g[2].v};
    for (int i = 0; i < 2; ++i) m.dg[i] = {g[0].d[i], g[1].d[i], g[2].d[i]};
    for (int k = 0; k < 3; ++k) m.d2g[k] = {g[0].h[k], g[1].h[k], g[2].h[k]};
    return m;
  }

  Sym2 metric(Vec2 p) const override {
    if (plain()) {
      const double r = profile_->rho(p.x);
      return {1.0, 0.0, r * r};
    }
    return metric_jet(p).g;
  }

  LocalGeometry local_geometry(Vec2 p) const override {
    if (!plain()) return geometry_from_jet(metric_jet(p));
    const auto d = profile_->derivs(p.x);
    LocalGeometry geo;
    geo.g = {1.0, 0.0, d.rho * d.rho};
    geo.christoffel.gamma[2] = -d.rho * d.drho;  // Gamma^t_{theta theta}
    geo.christoffel.gamma[4] = d.drho / d.rho;   // Gamma^theta_{t theta}
    geo.curvature = -d.d2rho / d.rho;
    return geo;
  }

  Box parameter_box() const override { return {{0.0, 0.0}, {profile_->length(), 2.0 * std::numbers::pi}}; }
  bool owns(Vec2 p) const override { return contains(p) && handoff_margin(p) >= 0.0; }
  Vec2 canonicalize(Vec2 p) const override { return {p.x, detail::wrap_angle(p.y)}; }

  double handoff_margin(Vec2 p) const override {
    const double half = 0.5 * profile_->collar();
    return std::min(p.x - half, profile_->length() - half - p.x);
  }

  std::optional<Handoff> overlap_transition(Vec2 p, Vec2 v) const override {
    const double L = profile_->length(), c = profile_->collar();
    const double ra = profile_->attachment_radius();
    Handoff h;
    double r, dr;
    if (p.x < c) {
      h.target = ChartId{ChartKind::PlaneBottom, 0};
      r = ra + c - p.x;
      dr = -v.x;
      h.flips_orientation = true;
    } else if (p.x > L - c) {
      h.target = ChartId{ChartKind::PlaneTop, 0};
      r = ra + c - (L - p.x);
      dr = v.x;
    } else {
      return std::nullopt;
    }
    const double cs = std::cos(p.y), sn = std::sin(p.y);
    h.p = {detail::wrap_period(center_.x + r * cs, a_), detail::wrap_period(center_.y + r * sn, b_)};
    h.v = {dr * cs - r * v.y * sn, dr * sn + r * v.y * cs};
    return h;
  }

 private:
  std::shared_ptr<const TubeProfile> profile_;
  Vec2 center_;
  int a_, b_;
  double bump_;
  std::optional<EmbeddingParams> immersion_;
  double bump_half_width_ = 0.0;
};

/// The periodic model surface (two planes joined by one tube per disk) divided
/// by a Z x b Z, together with the pieces it was built from.
struct ModelSpace {
  Atlas atlas;
  DiskLattice lattice;
  ModelOptions options;
  std::vector<std::shared_ptr<const TubeProfile>> profiles;  // one per lattice disk

  int tube_count() const { return static_cast<int>(atlas.count(ChartKind::Tube)); }
  int genus() const { return tube_count() + 1; }
};

inline ModelSpace build_model_space(const DiskLattice& lattice, const ModelOptions& opt = {}) {
  if (opt.quotient.a < 1 || opt.quotient.b < 1) throw InvalidArgument("quotient periods must be >= 1");
  const double c = opt.profile.collar;
  for (const Disk& d : lattice.disks()) {
    if (!(d.radius + c < 0.5)) throw InvalidArgument("disk radius plus collar must be < 0.5");
  }
  if (!lattice.empty() && !(lattice.min_clearance(c) > 0.0)) {
    throw InvalidArgument("collar annuli of distinct disks overlap");
  }
  if (opt.immersion) opt.immersion->require_embedded_slab();
  if (opt.plane_bump && opt.plane_bump->amplitude != 0.0) {
    const PlaneBump& pb = *opt.plane_bump;
    if (!(pb.radius > 0.0 && pb.radius < 0.5)) throw InvalidArgument("plane bump radius must lie in (0, 0.5)");
    if (!(pb.amplitude > -1.0)) throw InvalidArgument("plane bump amplitude must exceed -1");
    for (const Disk& d : lattice.disks()) {
      if (norm(DiskLattice::min_image(pb.center - d.center)) < d.radius + c + pb.radius) {
        throw InvalidArgument("plane bump overlaps a tube collar");
      }
    }
  }
  if (!(opt.tube_bump > -1.0)) throw InvalidArgument("tube bump amplitude must exceed -1");

  ModelSpace ms;
  ms.lattice = lattice;
  ms.options = opt;
  for (const Disk& d : lattice.disks()) ms.profiles.push_back(std::make_shared<const TubeProfile>(d.radius, opt.profile));
  ms.atlas.add(std::make_shared<PlaneChart>(ChartKind::PlaneBottom, lattice, ms.profiles, opt));
  ms.atlas.add(std::make_shared<PlaneChart>(ChartKind::PlaneTop, lattice, ms.profiles, opt));
  const auto& disks = lattice.disks();
  for (int j = 0; j < opt.quotient.b; ++j) {
    for (int i = 0; i < opt.quotient.a; ++i) {
      for (std::size_t k = 0; k < disks.size(); ++k) {
        const int idx = (j * opt.quotient.a + i) * static_cast<int>(disks.size()) + static_cast<int>(k);
        const Vec2 center = disks[k].center + Vec2{double(i), double(j)};
        ms.atlas.add(std::make_shared<TubeChart>(idx, ms.profiles[k], center, opt));
      }
    }
  }
  return ms;
}

inline Atlas assemble_model_atlas(const DiskLattice& lattice, std::optional<QuotientSpec> quotient = std::nullopt) {
  ModelOptions opt;
  if (quotient) opt.quotient = *quotient;
  return build_model_space(lattice, opt).atlas;
}

/// Bump placed at the point of the unit cell farthest from every collar, with
/// radius a fixed fraction of that clearance.
inline PlaneBump default_plane_bump(const DiskLattice& lattice, double collar, double amplitude) {
  if (lattice.empty()) return {{0.5, 0.5}, 0.25, amplitude};
  const int n = 200;
  double best = -1.0;
  Vec2 where{0.5, 0.5};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 p{(i + 0.5) / n, (j + 0.5) / n};
      double clear = std::numeric_limits<double>::infinity();
      for (const Disk& d : lattice.disks()) {
        clear = std::min(clear, norm(DiskLattice::min_image(p - d.center)) - d.radius - collar);
      }
      if (clear > best) {
        best = clear;
        where = p;
      }
    }
  }
  if (!(best > 0.0)) throw InvalidArgument("no room for a plane bump outside the collars");
  return {where, 0.85 * std::min(best, 0.45), amplitude};
}

/// Integral of K dA over every chart's owned region.
///
/// Tubes use composite Gauss-Legendre in t and the trapezoid rule in theta.
/// Exactly flat planes contribute 0; curved planes fall back to a midpoint rule
/// on `plane_grid` x `plane_grid` cells per unit square.
inline double gauss_bonnet_integral(const Atlas& atlas, int t_panels = 256, int theta_nodes = 64,
                                    int plane_grid = 256) {
  static constexpr double x8[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static constexpr double w8[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  CompensatedSum total;
  for (const auto& chart : atlas.charts()) {
    if (const auto* tube = dynamic_cast<const TubeChart*>(chart.get())) {
      const double L = tube->profile().length();
      const double h = L / t_panels;
      for (int k = 0; k < t_panels; ++k) {
        const double mid = (k + 0.5) * h;
        for (int q = 0; q < 8; ++q) {
          const double t = mid + (q < 4 ? -1.0 : 1.0) * 0.5 * h * x8[q % 4];
          const double wt = 0.5 * h * w8[q % 4];
          if (tube->plain()) {
            const auto d = tube->profile().derivs(t);
            total.add(wt * 2.0 * std::numbers::pi * (-d.d2rho));
          } else {
            for (int m = 0; m < theta_nodes; ++m) {
              const Vec2 p{t, 2.0 * std::numbers::pi * m / theta_nodes};
              const LocalGeometry geo = tube->local_geometry(p);
              total.add(wt * (2.0 * std::numbers::pi / theta_nodes) * geo.curvature * std::sqrt(geo.g.det()));
            }
          }
        }
      }
    } else if (const auto* plane = dynamic_cast<const PlaneChart*>(chart.get())) {
      if (plane->flat()) continue;
      const double hx = 1.0 / plane_grid;
      for (int i = 0; i < plane->period_a() * plane_grid; ++i) {
        for (int j = 0; j < plane->period_b() * plane_grid; ++j) {
          const Vec2 p{(i + 0.5) * hx, (j + 0.5) * hx};
          if (!plane->owns(p)) continue;
          const LocalGeometry geo = plane->local_geometry(p);
          total.add(hx * hx * geo.curvature * std::sqrt(geo.g.det()));
        }
      }
    }
  }
  return total.value();
}

}  // namespace anosov
