#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "anosov/errors.hpp"
#include "anosov/linalg.hpp"
#include "anosov/parallel.hpp"
#include "anosov/rng.hpp"

namespace anosov {

struct Disk {
  Vec2 center;
  double radius = 0.0;
};

/// Closed disks in the unit cell, repeated with Z^2 translational symmetry.
class DiskLattice {
 public:
  DiskLattice() = default;
  explicit DiskLattice(std::vector<Disk> disks) : disks_(std::move(disks)) { validate(); }

  const std::vector<Disk>& disks() const { return disks_; }
  std::size_t size() const { return disks_.size(); }
  bool empty() const { return disks_.empty(); }

  /// Smallest gap between distinct disks over all translates, minus `extra` on each radius.
  double min_clearance(double extra = 0.0) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < disks_.size(); ++i) {
      for (std::size_t j = i; j < disks_.size(); ++j) {
        for (int dx = -2; dx <= 2; ++dx) {
          for (int dy = -2; dy <= 2; ++dy) {
            if (i == j && dx == 0 && dy == 0) continue;
            const Vec2 d = disks_[j].center + Vec2{double(dx), double(dy)} - disks_[i].center;
            best = std::min(best, norm(d) - disks_[i].radius - disks_[j].radius - 2.0 * extra);
          }
        }
      }
    }
    return best;
  }

  /// True when p lies in the open interior of some disk (any translate).
  bool in_open_disk(Vec2 p) const {
    for (const Disk& d : disks_) {
      const Vec2 q = min_image(p - d.center);
      if (dot(q, q) < d.radius * d.radius) return true;
    }
    return false;
  }

  static Vec2 min_image(Vec2 d) { return {d.x - std::round(d.x), d.y - std::round(d.y)}; }

 private:
  void validate() const {
    for (std::size_t i = 0; i < disks_.size(); ++i) {
      const Disk& d = disks_[i];
      const std::string tag = "disks[" + std::to_string(i) + "]";
      if (!(d.radius > 0.0)) throw InvalidArgument(tag + ": radius must be > 0");
      if (!(d.radius < 0.5)) throw InvalidArgument(tag + ": radius must be < 0.5");
      if (!(d.center.x >= 0.0 && d.center.x < 1.0 && d.center.y >= 0.0 && d.center.y < 1.0)) {
        throw InvalidArgument(tag + ": center must lie in [0,1)^2");
      }
    }
    if (!(min_clearance() > 0.0)) throw InvalidArgument("disks (including translates) must be pairwise disjoint");
  }

  std::vector<Disk> disks_;
};

/// Two disks per cell with a finite horizon: the large disk closes the diagonal
/// corridors, the pair together closes the axis-parallel ones.
inline DiskLattice default_lattice() { return DiskLattice({{{0.25, 0.25}, 0.38}, {{0.75, 0.75}, 0.18}}); }

struct HorizonOptions {
  int angular_samples = 64;
  int offset_samples = 64;
  double t_max = 50.0;
  std::size_t random_rays = 10000;
  int q_max = 20;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct CorridorWitness {
  double angle = 0.0;   // direction of the corridor, in [0, pi)
  double offset = 0.0;  // n . x on the corridor's central line, n = (-sin, cos)
  double width = 0.0;
};

struct RayInfo {
  Vec2 point;
  double angle = 0.0;
};

struct HorizonReport {
  double bound_T = 0.0;  // +inf when violated
  RayInfo worst_ray;
  bool violated = false;
  std::optional<CorridorWitness> corridor_witness;
  std::size_t rays_traced = 0;
};

/// Time until the straight ray from p in unit direction d first enters an open
/// disk, or +inf if that does not happen before t_max.
inline double first_entry_time(const DiskLattice& lattice, Vec2 p, Vec2 d, double t_max) {
  if (lattice.empty()) return std::numeric_limits<double>::infinity();
  long cx = static_cast<long>(std::floor(p.x)), cy = static_cast<long>(std::floor(p.y));
  const int sx = d.x > 0 ? 1 : -1, sy = d.y > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  double next_x = d.x != 0.0 ? ((d.x > 0 ? cx + 1.0 : double(cx)) - p.x) / d.x : inf;
  double next_y = d.y != 0.0 ? ((d.y > 0 ? cy + 1.0 : double(cy)) - p.y) / d.y : inf;
  const double step_x = d.x != 0.0 ? std::fabs(1.0 / d.x) : inf;
  const double step_y = d.y != 0.0 ? std::fabs(1.0 / d.y) : inf;
  double best = inf;
  for (;;) {
    for (long ix = cx - 1; ix <= cx + 1; ++ix) {
      for (long iy = cy - 1; iy <= cy + 1; ++iy) {
        for (const Disk& disk : lattice.disks()) {
          const Vec2 c = disk.center + Vec2{double(ix), double(iy)};
          const Vec2 q = p - c;
          const double b = dot(q, d);
          const double disc = b * b - (dot(q, q) - disk.radius * disk.radius);
          if (disc <= 0.0) continue;  // tangent lines do not enter the open disk
          const double t1 = -b - std::sqrt(disc);
          const double t2 = -b + std::sqrt(disc);
          if (t2 <= 0.0) continue;
          best = std::min(best, std::max(t1, 0.0));
        }
      }
    }
    const double exit = std::min(next_x, next_y);
    if (best <= exit) return best <= t_max ? best : inf;
    if (exit > t_max) return inf;
    if (next_x < next_y) {
      cx += sx;
      next_x += step_x;
    } else {
      cy += sy;
      next_y += step_y;
    }
  }
}

/// Widest open corridor among rational directions (q, p) with max(|p|,|q|) <= q_max.
inline std::optional<CorridorWitness> find_corridor(const DiskLattice& lattice, int q_max) {
  struct Dir {
    int q, p;
  };
  std::vector<Dir> dirs;
  for (int m = 1; m <= q_max; ++m) {
    for (int q = 0; q <= m; ++q) {
      for (int p = -m; p <= m; ++p) {
        if (std::max(std::abs(p), q) != m || std::gcd(p, q) != 1) continue;
        if (q == 0 && p != 1) continue;
        dirs.push_back({q, p});
      }
    }
  }
  auto dir_angle = [](const Dir& d) {
    const double a = std::atan2(double(d.p), double(d.q));
    return a < 0.0 ? a + std::numbers::pi : a;
  };
  std::stable_sort(dirs.begin(), dirs.end(), [&](const Dir& x, const Dir& y) {
    const int mx = std::max(std::abs(x.p), x.q), my = std::max(std::abs(y.p), y.q);
    return mx != my ? mx < my : dir_angle(x) < dir_angle(y);
  });
  std::optional<CorridorWitness> best;
  for (const Dir& dir : dirs) {
    const double len = std::hypot(double(dir.q), double(dir.p));
    const double period = 1.0 / len;
    const Vec2 n{-dir.p / len, dir.q / len};
    const double angle = dir_angle(dir);
    struct Interval {
      double lo, hi;
    };
    std::vector<Interval> blocked;
    bool full = false;
    for (const Disk& d : lattice.disks()) {
      if (2.0 * d.radius >= period) {
        full = true;
        break;
      }
      double s = std::fmod(dot(n, d.center) - d.radius, period);
      if (s < 0.0) s += period;
      blocked.push_back({s, s + 2.0 * d.radius});
    }
    if (full) continue;
    double gap = period, gap_mid = 0.5 * period;
    if (!blocked.empty()) {
      std::sort(blocked.begin(), blocked.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
      gap = 0.0;
      double reach = blocked.front().hi;
      const double wrap_end = blocked.front().lo + period;
      for (std::size_t i = 1; i <= blocked.size(); ++i) {
        const double lo = i < blocked.size() ? blocked[i].lo : wrap_end;
        if (lo - reach > gap) {
          gap = lo - reach;
          gap_mid = 0.5 * (lo + reach);
        }
        if (i < blocked.size()) reach = std::max(reach, blocked[i].hi);
      }
    }
    if (gap > 1e-12 && (!best || gap > best->width + 1e-12)) {
      double off = std::fmod(gap_mid, period);
      if (off < 0.0) off += period;
      best = CorridorWitness{angle, off, gap};
    }
  }
  return best;
}

/// Finite-horizon check for the billiard table R^2 minus the lattice disks.
///
/// Rays start on an offset_samples^2 grid of cell points (points inside disks
/// are skipped) in angular_samples directions, plus `random_rays` random rays
/// and the central ray of any rational corridor found.
inline HorizonReport finite_horizon_bound(const DiskLattice& lattice, const HorizonOptions& opt) {
  if (opt.angular_samples < 8 || opt.offset_samples < 8) throw InvalidArgument("horizon sampling must be >= 8");
  if (!(opt.t_max > 0.0)) throw InvalidArgument("T_max must be positive");
  HorizonReport rep;
  rep.corridor_witness = find_corridor(lattice, opt.q_max);

  std::vector<RayInfo> rays;
  const int no = opt.offset_samples, na = opt.angular_samples;
  for (int i = 0; i < no; ++i) {
    for (int j = 0; j < no; ++j) {
      const Vec2 p{(i + 0.5) / no, (j + 0.5) / no};
      if (lattice.in_open_disk(p)) continue;
      for (int k = 0; k < na; ++k) rays.push_back({p, 2.0 * std::numbers::pi * k / na});
    }
  }
  const CounterRng rng(opt.seed, 0x686f72697a6f6eULL);
  for (std::size_t r = 0; r < opt.random_rays; ++r) {
    const Vec2 p{rng.uniform(3 * r), rng.uniform(3 * r + 1)};
    if (lattice.in_open_disk(p)) continue;
    rays.push_back({p, 2.0 * std::numbers::pi * rng.uniform(3 * r + 2)});
  }
  if (rep.corridor_witness) {
    const CorridorWitness& w = *rep.corridor_witness;
    const Vec2 n{-std::sin(w.angle), std::cos(w.angle)};
    rays.push_back({w.offset * n, w.angle});
  }

  std::vector<double> times(rays.size());
  parallel_for(rays.size(), opt.threads, [&](std::size_t i) {
    const Vec2 d{std::cos(rays[i].angle), std::sin(rays[i].angle)};
    times[i] = first_entry_time(lattice, rays[i].point, d, opt.t_max);
  });
  rep.rays_traced = rays.size();
  for (std::size_t i = 0; i < rays.size(); ++i) {
    if (times[i] > rep.bound_T) {
      rep.bound_T = times[i];
      rep.worst_ray = rays[i];
    }
  }
  rep.violated = !std::isfinite(rep.bound_T);
  return rep;
}

inline HorizonReport finite_horizon_bound(const DiskLattice& lattice, int angular_samples, int offset_samples,
                                          double t_max) {
  HorizonOptions opt;
  opt.angular_samples = angular_samples;
  opt.offset_samples = offset_samples;
  opt.t_max = t_max;
  return finite_horizon_bound(lattice, opt);
}

}  // namespace anosov
