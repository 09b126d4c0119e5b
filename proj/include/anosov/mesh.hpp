#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <queue>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "anosov/embedding.hpp"
#include "anosov/errors.hpp"
#include "anosov/model_space.hpp"
#include "anosov/parallel.hpp"

namespace anosov {

struct MeshResolution {
  int nu = 64;  // grid cells along u over the whole fundamental region
  int nv = 64;  // grid cells along v
  int tube_rings = 0;  // 0 picks a ring count matching the grid spacing
};

/// Which piece of the surface a vertex belongs to.
enum class MeshRegion { PlaneBottom, PlaneTop, Tube };

struct MeshVertex {
  Vec3 position;
  Vec3 source;  // (u, v, w) in the slab
  MeshRegion region = MeshRegion::PlaneBottom;
  int tube = -1;
};

struct Mesh {
  std::vector<MeshVertex> vertices;
  std::vector<std::array<int, 3>> faces;

  long edge_count() const { return static_cast<long>(edge_uses().size()); }
  long euler_characteristic() const {
    return static_cast<long>(vertices.size()) - edge_count() + static_cast<long>(faces.size());
  }

  /// True when every edge borders exactly two faces.
  bool closed() const {
    for (const auto& [e, n] : edge_uses())
      if (n != 2) return false;
    return true;
  }

  std::map<std::pair<int, int>, int> edge_uses() const {
    std::map<std::pair<int, int>, int> uses;
    for (const auto& f : faces) {
      for (int k = 0; k < 3; ++k) {
        const int a = f[k], b = f[(k + 1) % 3];
        ++uses[{std::min(a, b), std::max(a, b)}];
      }
    }
    return uses;
  }

  void write_obj(std::ostream& os) const {
    char buf[96];
    for (const MeshVertex& v : vertices) {
      std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.position[0], v.position[1], v.position[2]);
      os << buf;
    }
    for (const auto& f : faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
};

namespace detail {

/// Flip faces so that neighbouring faces traverse their shared edge in opposite directions.
inline void orient_consistently(Mesh& mesh) {
  const std::size_t nf = mesh.faces.size();
  std::map<std::pair<int, int>, std::vector<std::size_t>> by_edge;
  for (std::size_t i = 0; i < nf; ++i) {
    const auto& f = mesh.faces[i];
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3];
      by_edge[{std::min(a, b), std::max(a, b)}].push_back(i);
    }
  }
  auto has_directed = [&](std::size_t fi, int a, int b) {
    const auto& f = mesh.faces[fi];
    for (int k = 0; k < 3; ++k)
      if (f[k] == a && f[(k + 1) % 3] == b) return true;
    return false;
  };
  std::vector<char> seen(nf, 0);
  for (std::size_t start = 0; start < nf; ++start) {
    if (seen[start]) continue;
    seen[start] = 1;
    std::queue<std::size_t> todo;
    todo.push(start);
    while (!todo.empty()) {
      const std::size_t fi = todo.front();
      todo.pop();
      const auto f = mesh.faces[fi];
      for (int k = 0; k < 3; ++k) {
        const int a = f[k], b = f[(k + 1) % 3];
        for (std::size_t g : by_edge[{std::min(a, b), std::max(a, b)}]) {
          if (g == fi || seen[g]) continue;
          if (has_directed(g, a, b)) std::swap(mesh.faces[g][1], mesh.faces[g][2]);
          seen[g] = 1;
          todo.push(g);
        }
      }
    }
  }
}

struct HoleLoop {
  std::vector<int> grid_vertices;  // grid indices j * nu + i, counterclockwise
  std::vector<double> angles;      // increasing, spanning less than 2 pi from the first
};

}  // namespace detail

/// Triangle mesh of X_s applied to the model surface over one fundamental
/// region [0, m) x [0, n). Each plane is a periodic grid with the cells near
/// every tube removed; the staircase boundary of each removed block is joined
/// to the circle |p - c_k| = r_k, and the tube is a stack of rings at the same
/// angles. Shared vertices are identified by index.
inline Mesh export_mesh(const ModelSpace& model, const EmbeddingParams& e, const MeshResolution& res = {},
                        unsigned threads = 1) {
  e.require_embedded_slab();
  const auto mn = periodicity_check(e);
  if (!mn) throw NonPeriodic("2 pi R1 and 2 pi R2 must both be integers for the image to close up");
  const long m = mn->first, n = mn->second;
  if (model.options.quotient.a != m || model.options.quotient.b != n) {
    throw InvalidArgument("model quotient (" + std::to_string(model.options.quotient.a) + "," +
                          std::to_string(model.options.quotient.b) + ") does not match the embedding periods (" +
                          std::to_string(m) + "," + std::to_string(n) + ")");
  }
  if (res.nu < 3 || res.nv < 3) throw InvalidArgument("mesh resolution must be at least 3 x 3");

  const int nu = res.nu, nv = res.nv;
  const double hx = double(m) / nu, hy = double(n) / nv;
  auto min_image = [&](Vec2 d) {
    return Vec2{d.x - double(m) * std::round(d.x / double(m)), d.y - double(n) * std::round(d.y / double(n))};
  };

  struct Hole {
    const TubeChart* chart;
    double radius;
  };
  std::vector<Hole> holes;
  for (const auto& c : model.atlas.charts()) {
    if (const auto* t = dynamic_cast<const TubeChart*>(c.get())) holes.push_back({t, t->profile().attachment_radius()});
  }
  std::sort(holes.begin(), holes.end(), [](const Hole& a, const Hole& b) { return a.chart->id().index < b.chart->id().index; });

  // Assign grid cells to holes.
  const double pad = 0.25 * std::min(hx, hy);
  std::vector<int> owner(std::size_t(nu) * nv, -1);
  for (std::size_t h = 0; h < holes.size(); ++h) {
    const Vec2 c = holes[h].chart->center();
    const double reach = holes[h].radius + pad;
    const int i0 = static_cast<int>(std::floor((c.x - reach) / hx)) - 1, i1 = static_cast<int>(std::ceil((c.x + reach) / hx)) + 1;
    const int j0 = static_cast<int>(std::floor((c.y - reach) / hy)) - 1, j1 = static_cast<int>(std::ceil((c.y + reach) / hy)) + 1;
    if (i1 - i0 >= nu || j1 - j0 >= nv) throw InvalidArgument("mesh resolution too coarse for the tube holes");
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const double lx = i * hx - c.x, ly = j * hy - c.y;
        const double dx = lx < 0.0 && lx + hx > 0.0 ? 0.0 : std::min(std::fabs(lx), std::fabs(lx + hx));
        const double dy = ly < 0.0 && ly + hy > 0.0 ? 0.0 : std::min(std::fabs(ly), std::fabs(ly + hy));
        if (std::hypot(dx, dy) >= reach) continue;
        int& o = owner[std::size_t(((j % nv) + nv) % nv) * nu + ((i % nu) + nu) % nu];
        if (o >= 0) throw InvalidArgument("mesh resolution too coarse: tube holes share a grid cell");
        o = static_cast<int>(h);
      }
    }
  }
  auto cell_owner = [&](int i, int j) { return owner[std::size_t(((j % nv) + nv) % nv) * nu + ((i % nu) + nu) % nu]; };
  auto grid_index = [&](int i, int j) { return ((j % nv) + nv) % nv * nu + ((i % nu) + nu) % nu; };
  for (int j = 0; j < nv; ++j) {
    for (int i = 0; i < nu; ++i) {
      int seen = -1;
      for (auto [di, dj] : std::initializer_list<std::pair<int, int>>{{-1, -1}, {0, -1}, {-1, 0}, {0, 0}}) {
        const int o = cell_owner(i + di, j + dj);
        if (o < 0) continue;
        if (seen >= 0 && o != seen) throw InvalidArgument("mesh resolution too coarse: tube holes touch");
        seen = o;
      }
    }
  }

  // Counterclockwise staircase boundary of each hole.
  std::vector<detail::HoleLoop> loops(holes.size());
  {
    std::vector<std::unordered_map<int, int>> next(holes.size());
    auto add_edge = [&](int h, int a, int b) {
      if (!next[h].emplace(a, b).second) throw InvalidArgument("mesh resolution too coarse: pinched hole boundary");
    };
    for (int j = 0; j < nv; ++j) {
      for (int i = 0; i < nu; ++i) {
        const int h = cell_owner(i, j);
        if (h < 0) continue;
        if (cell_owner(i, j - 1) != h) add_edge(h, grid_index(i, j), grid_index(i + 1, j));
        if (cell_owner(i + 1, j) != h) add_edge(h, grid_index(i + 1, j), grid_index(i + 1, j + 1));
        if (cell_owner(i, j + 1) != h) add_edge(h, grid_index(i + 1, j + 1), grid_index(i, j + 1));
        if (cell_owner(i - 1, j) != h) add_edge(h, grid_index(i, j + 1), grid_index(i, j));
      }
    }
    for (std::size_t h = 0; h < holes.size(); ++h) {
      if (next[h].empty()) throw InvalidArgument("mesh resolution too coarse: a tube hole removed no cells");
      const Vec2 c = holes[h].chart->center();
      std::vector<std::pair<double, int>> loop;
      int v = next[h].begin()->first;
      const int first = v;
      do {
        const Vec2 d = min_image(Vec2{(v % nu) * hx, (v / nu) * hy} - c);
        loop.push_back({std::atan2(d.y, d.x), v});
        v = next[h].at(v);
      } while (v != first && loop.size() <= next[h].size());
      if (loop.size() != next[h].size()) throw InvalidArgument("mesh resolution too coarse: hole boundary is not one loop");
      const auto start = std::min_element(loop.begin(), loop.end()) - loop.begin();
      std::rotate(loop.begin(), loop.begin() + start, loop.end());
      for (std::size_t k = 1; k < loop.size(); ++k) {
        if (!(loop[k].first > loop[k - 1].first)) {
          throw InvalidArgument("mesh resolution too coarse: hole boundary is not star-shaped");
        }
      }
      for (const auto& [a, gv] : loop) {
        loops[h].grid_vertices.push_back(gv);
        loops[h].angles.push_back(a);
      }
    }
  }

  Mesh mesh;
  std::vector<int> used(std::size_t(nu) * nv, 0);
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i)
      if (cell_owner(i, j) < 0)
        for (auto [di, dj] : std::initializer_list<std::pair<int, int>>{{0, 0}, {1, 0}, {0, 1}, {1, 1}}) used[grid_index(i + di, j + dj)] = 1;

  auto add_vertex = [&](Vec3 src, MeshRegion region, int tube) {
    mesh.vertices.push_back({{}, src, region, tube});
    return static_cast<int>(mesh.vertices.size()) - 1;
  };
  auto add_quad = [&](int a, int b, int c, int d) {
    mesh.faces.push_back({a, b, c});
    mesh.faces.push_back({a, c, d});
  };

  // Plane grids and their hole annuli. ring[p][h] are the circle vertices on plane p.
  std::vector<std::vector<std::vector<int>>> ring(2, std::vector<std::vector<int>>(holes.size()));
  for (int p = 0; p < 2; ++p) {
    const double w = p;
    const MeshRegion region = p == 0 ? MeshRegion::PlaneBottom : MeshRegion::PlaneTop;
    std::vector<int> id(std::size_t(nu) * nv, -1);
    for (int k = 0; k < nu * nv; ++k)
      if (used[k]) id[k] = add_vertex({(k % nu) * hx, (k / nu) * hy, w}, region, -1);
    for (int j = 0; j < nv; ++j)
      for (int i = 0; i < nu; ++i)
        if (cell_owner(i, j) < 0)
          add_quad(id[grid_index(i, j)], id[grid_index(i + 1, j)], id[grid_index(i + 1, j + 1)],
                   id[grid_index(i, j + 1)]);
    for (std::size_t h = 0; h < holes.size(); ++h) {
      const Vec2 c = holes[h].chart->center();
      const double r = holes[h].radius;
      auto& rv = ring[p][h];
      for (double a : loops[h].angles) rv.push_back(add_vertex({c.x + r * std::cos(a), c.y + r * std::sin(a), w}, region, -1));
      const auto& lv = loops[h].grid_vertices;
      const std::size_t K = lv.size();
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t k1 = (k + 1) % K;
        add_quad(id[lv[k]], id[lv[k1]], rv[k1], rv[k]);
      }
    }
  }

  // Tubes: rings at interior arclengths between the two attachment circles.
  for (std::size_t h = 0; h < holes.size(); ++h) {
    const TubeProfile& prof = holes[h].chart->profile();
    const double t0 = prof.collar(), t1 = prof.length() - prof.collar();
    const int rings = res.tube_rings > 0 ? res.tube_rings
                                         : std::max(4, static_cast<int>(std::ceil((t1 - t0) / std::min(hx, hy))));
    const Vec2 c = holes[h].chart->center();
    const int idx = holes[h].chart->id().index;
    std::vector<int> prev = ring[0][h];
    for (int l = 1; l <= rings; ++l) {
      std::vector<int> cur;
      if (l == rings) {
        cur = ring[1][h];
      } else {
        const double t = t0 + (t1 - t0) * l / rings;
        const double r = prof.rho(t), w = prof.height(t);
        for (double a : loops[h].angles) cur.push_back(add_vertex({c.x + r * std::cos(a), c.y + r * std::sin(a), w}, MeshRegion::Tube, idx));
      }
      const std::size_t K = cur.size();
      for (std::size_t k = 0; k < K; ++k) add_quad(prev[k], prev[(k + 1) % K], cur[(k + 1) % K], cur[k]);
      prev = std::move(cur);
    }
  }

  parallel_for(mesh.vertices.size(), threads,
               [&](std::size_t i) { mesh.vertices[i].position = embed_point(mesh.vertices[i].source, e); });
  detail::orient_consistently(mesh);
  return mesh;
}

struct CollisionReport {
  bool collision = false;
  double min_distance = std::numeric_limits<double>::infinity();
  int tube_a = -1, tube_b = -1;
};

/// Smallest distance in R^3 between vertices of different tubes. A value below
/// `tol` flags a likely collision; this samples vertices only and can miss
/// crossings between them.
inline CollisionReport tube_collision_spot_check(const Mesh& mesh, double tol) {
  CollisionReport rep;
  std::vector<const MeshVertex*> tv;
  for (const auto& v : mesh.vertices)
    if (v.region == MeshRegion::Tube) tv.push_back(&v);
  if (tv.empty()) return rep;
  const double cell = std::max(tol, 1e-6);
  struct Key {
    long x, y, z;
    bool operator<(const Key& o) const { return std::tie(x, y, z) < std::tie(o.x, o.y, o.z); }
  };
  auto key = [&](const Vec3& p) {
    return Key{long(std::floor(p[0] / cell)), long(std::floor(p[1] / cell)), long(std::floor(p[2] / cell))};
  };
  std::map<Key, std::vector<const MeshVertex*>> grid;
  for (const auto* v : tv) grid[key(v->position)].push_back(v);
  for (const auto* v : tv) {
    const Key k = key(v->position);
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find({k.x + dx, k.y + dy, k.z + dz});
          if (it == grid.end()) continue;
          for (const auto* o : it->second) {
            if (o->tube == v->tube) continue;
            const double d = std::hypot(v->position[0] - o->position[0], v->position[1] - o->position[1],
                                        v->position[2] - o->position[2]);
            if (d < rep.min_distance) {
              rep.min_distance = d;
              rep.tube_a = std::min(v->tube, o->tube);
              rep.tube_b = std::max(v->tube, o->tube);
            }
          }
        }
  }
  rep.collision = rep.min_distance < tol;
  return rep;
}

}  // namespace anosov
