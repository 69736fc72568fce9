#include "lq/shapes.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace lq::shapes {

namespace {

struct LatticeBuilder {
  std::map<std::array<int, 3>, int> index;
  std::vector<Vec3> vertices;
  Vec3 step;

  int vertex(const std::array<int, 3>& p) {
    auto [it, inserted] = index.emplace(p, static_cast<int>(vertices.size()));
    if (inserted) vertices.emplace_back(p[0] * step.x(), p[1] * step.y(), p[2] * step.z());
    return it->second;
  }
};

}  // namespace

TriMesh voxel_surface(const std::vector<std::array<int, 3>>& voxels, const Vec3& cell,
                      int subdiv) {
  const int s = std::max(1, subdiv);
  const std::set<std::array<int, 3>> occupied(voxels.begin(), voxels.end());
  LatticeBuilder lat;
  lat.step = cell / s;
  std::vector<std::array<int, 3>> tris;

  // (axis, sign, t1, t2) with t1 x t2 = outward normal.
  struct Dir {
    int axis, sign, t1, t2;
  };
  const Dir dirs[6] = {{0, +1, 1, 2}, {0, -1, 2, 1}, {1, +1, 2, 0},
                       {1, -1, 0, 2}, {2, +1, 0, 1}, {2, -1, 1, 0}};
  for (const auto& v : voxels) {
    for (const Dir& d : dirs) {
      std::array<int, 3> nb = v;
      nb[d.axis] += d.sign;
      if (occupied.count(nb)) continue;
      std::array<int, 3> base{v[0] * s, v[1] * s, v[2] * s};
      if (d.sign > 0) base[d.axis] += s;
      for (int i = 0; i < s; ++i) {
        for (int j = 0; j < s; ++j) {
          auto corner = [&](int di, int dj) {
            std::array<int, 3> p = base;
            p[d.t1] += i + di;
            p[d.t2] += j + dj;
            return lat.vertex(p);
          };
          const int c0 = corner(0, 0), c1 = corner(1, 0), c2 = corner(1, 1), c3 = corner(0, 1);
          tris.push_back({c0, c1, c2});
          tris.push_back({c0, c2, c3});
        }
      }
    }
  }
  return TriMesh::build(std::move(lat.vertices), std::move(tris));
}

TriMesh unit_cube() { return voxel_surface({{0, 0, 0}}, Vec3::Ones(), 1); }

TriMesh box(const Vec3& size, int subdiv) { return voxel_surface({{0, 0, 0}}, size, subdiv); }

TriMesh l_bracket(const Vec3& cell, int subdiv) {
  return voxel_surface({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, cell, subdiv);
}

TriMesh fused_boxes(const Vec3& cell, int subdiv) {
  return voxel_surface({{0, 0, 0}, {1, 1, 0}}, cell, subdiv);
}

TriMesh flat_grid(int nx, int ny, double width, double height) {
  std::vector<Vec3> verts;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) verts.emplace_back(width * i / nx, height * j / ny, 0.0);
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> tris;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return TriMesh::build(std::move(verts), std::move(tris));
}

TriMesh cylinder(double radius, double height, int segments, int rings, int cap_rings) {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  const double two_pi = 2.0 * std::numbers::pi;
  auto ring_point = [&](double r, int i, double z) {
    const double a = two_pi * i / segments;
    return Vec3(r * std::cos(a), r * std::sin(a), z);
  };
  // Side rings.
  for (int k = 0; k <= rings; ++k) {
    for (int i = 0; i < segments; ++i) verts.push_back(ring_point(radius, i, height * k / rings));
  }
  auto side = [&](int i, int k) { return k * segments + (i % segments); };
  for (int k = 0; k < rings; ++k) {
    for (int i = 0; i < segments; ++i) {
      const int c0 = side(i, k), c1 = side(i + 1, k), c2 = side(i + 1, k + 1), c3 = side(i, k + 1);
      tris.push_back({c0, c1, c2});
      tris.push_back({c0, c2, c3});
    }
  }
  auto cap = [&](bool top) {
    const double z = top ? height : 0.0;
    const int center = static_cast<int>(verts.size());
    verts.emplace_back(0.0, 0.0, z);
    // Inner rings 1..cap_rings-1, the outer ring is the side boundary.
    std::vector<int> ring_start(cap_rings + 1);
    for (int k = 1; k < cap_rings; ++k) {
      ring_start[k] = static_cast<int>(verts.size());
      for (int i = 0; i < segments; ++i) verts.push_back(ring_point(radius * k / cap_rings, i, z));
    }
    ring_start[cap_rings] = top ? side(0, rings) : side(0, 0);
    auto rv = [&](int k, int i) { return ring_start[k] + (i % segments); };
    auto emit = [&](int a, int b, int c) {
      if (top) tris.push_back({a, b, c});
      else tris.push_back({a, c, b});
    };
    for (int i = 0; i < segments; ++i) emit(center, rv(1, i), rv(1, i + 1));
    for (int k = 1; k < cap_rings; ++k) {
      for (int i = 0; i < segments; ++i) {
        const int c0 = rv(k, i), c1 = rv(k + 1, i), c2 = rv(k + 1, i + 1), c3 = rv(k, i + 1);
        emit(c0, c1, c2);
        emit(c0, c2, c3);
      }
    }
  };
  cap(false);
  cap(true);
  return TriMesh::build(std::move(verts), std::move(tris));
}

TriMesh icosphere(double radius, int subdiv) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                             {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                             {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int level = 0; level < subdiv; ++level) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const int id = static_cast<int>(verts.size());
      verts.push_back((verts[a] + verts[b]).normalized());
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }
  for (auto& v : verts) v *= radius;
  return TriMesh::build(std::move(verts), std::move(faces));
}

TriMesh torus(double major, double minor, int nu, int nv) {
  std::vector<Vec3> verts;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < nu; ++i) {
    const double u = two_pi * i / nu;
    for (int j = 0; j < nv; ++j) {
      const double v = two_pi * j / nv;
      verts.emplace_back((major + minor * std::cos(v)) * std::cos(u),
                         (major + minor * std::cos(v)) * std::sin(u), minor * std::sin(v));
    }
  }
  auto id = [&](int i, int j) { return (i % nu) * nv + (j % nv); };
  std::vector<std::array<int, 3>> tris;
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const int c0 = id(i, j), c1 = id(i + 1, j), c2 = id(i + 1, j + 1), c3 = id(i, j + 1);
      tris.push_back({c0, c1, c2});
      tris.push_back({c0, c2, c3});
    }
  }
  return TriMesh::build(std::move(verts), std::move(tris));
}

TriMesh tetrahedron() {
  std::vector<Vec3> verts = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  std::vector<std::array<int, 3>> faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return TriMesh::build(std::move(verts), std::move(faces));
}

}  // namespace lq::shapes
