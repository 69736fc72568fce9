#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "lq/crossfield.hpp"
#include "lq/metrics.hpp"
#include "lq/rng.hpp"
#include "lq/shapes.hpp"

using namespace lq;

namespace {

QuadMesh quad_grid(int nx, int ny) {
  QuadMesh qm;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) qm.vertices.emplace_back(i, j, 0.0);
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      qm.quads.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  qm.provenance.assign(qm.vertices.size(), VertexSource::kInterior);
  qm.on_mesh_boundary.assign(qm.vertices.size(), 0);
  qm.on_nonmanifold.assign(qm.vertices.size(), 0);
  qm.quad_patch.assign(qm.quads.size(), 0);
  return qm;
}

QuadMesh cube_quads() {
  const TriMesh cube = shapes::unit_cube();
  const auto sal = compute_saliency(cube, 30.0);
  std::vector<double> probs(cube.num_edges(), 0.0);
  for (int e : sal.salient_edges) probs[e] = 1.0;
  FieldSolveOptions fo;
  fo.max_sweeps = 1000;
  const auto field = oracle_field(cube, align_to_structure(cube, sal.salient_edges), fo);
  RemeshOptions ro;
  ro.target_len = 0.25;
  return remesh(cube, probs, field, ro).quads;
}

// Brute-force nearest distance over a dense barycentric lattice.
double brute_distance(const Vec3& p, const std::array<Vec3, 3>& t) {
  double best = std::numeric_limits<double>::infinity();
  const int n = 200;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; i + j <= n; ++j) {
      const double u = double(i) / n, v = double(j) / n;
      best = std::min(best, (p - (t[0] + u * (t[1] - t[0]) + v * (t[2] - t[0]))).norm());
    }
  }
  return best;
}

}  // namespace

TEST_CASE("count_singularities: grids, single quad and the quadded cube") {
  CHECK(count_singularities(quad_grid(1, 1)) == 0);
  CHECK(count_singularities(quad_grid(5, 3)) == 0);
  const QuadMesh cube = cube_quads();
  REQUIRE(cube.quads.size() == 96);
  CHECK(count_singularities(cube) == 8);
  CHECK(count_singularities_detailed(cube).nonmanifold_vertices == 0);
}

TEST_CASE("count_singularities: boundary irregularity and non-manifold vertices") {
  // A 3x3 grid without its middle quad: the four hole corners sit on the
  // boundary with valence 4; the outer corners have valence 2.
  QuadMesh ring = quad_grid(3, 3);
  ring.quads.erase(ring.quads.begin() + 4);
  CHECK(count_singularities(ring) == 4);

  // Three quads on one edge: both endpoints are non-manifold, not irregular.
  QuadMesh fan;
  fan.vertices = {Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(1, 0, 1),
                  Vec3(0, 1, 0), Vec3(0, 1, 1), Vec3(-1, 0, 0), Vec3(-1, 0, 1)};
  fan.quads = {{0, 2, 3, 1}, {0, 1, 5, 4}, {0, 6, 7, 1}};
  const auto s = count_singularities_detailed(fan);
  CHECK(s.nonmanifold_vertices == 2);
}

TEST_CASE("count_singularities is invariant under vertex reindexing") {
  const QuadMesh cube = cube_quads();
  std::vector<int> perm(cube.vertices.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(7);
  for (size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  QuadMesh shuffled = cube;
  for (size_t v = 0; v < perm.size(); ++v) shuffled.vertices[perm[v]] = cube.vertices[v];
  for (auto& q : shuffled.quads) {
    for (int& v : q) v = perm[v];
  }
  CHECK(count_singularities(shuffled) == count_singularities(cube));
}

TEST_CASE("closest point and BVH agree with brute force") {
  Rng rng(3);
  auto rnd = [&] { return Vec3(rng.uniform(), rng.uniform(), rng.uniform()) * 2.0 - Vec3::Ones(); };
  for (int trial = 0; trial < 40; ++trial) {
    const std::array<Vec3, 3> t = {rnd(), rnd(), rnd()};
    const Vec3 p = rnd() * 1.5;
    const double exact = (p - closest_point_on_triangle(p, t[0], t[1], t[2])).norm();
    const double brute = brute_distance(p, t);
    CHECK(exact <= brute + 1e-12);
    CHECK(brute - exact < 0.02);
  }

  const TriangleSoup tris = triangles_of(shapes::icosphere(1.0, 2));
  const TriangleBvh bvh(tris);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 p = rnd() * 1.7;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : tris) {
      best = std::min(best, (p - closest_point_on_triangle(p, t[0], t[1], t[2])).squaredNorm());
    }
    CHECK(bvh.squared_distance(p) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("sample_surface is area uniform and deterministic") {
  // Two triangles with areas 1 and 3.
  TriangleSoup tris = {{Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 1, 0)},
                       {Vec3(0, 0, 5), Vec3(3, 0, 5), Vec3(0, 2, 5)}};
  const auto pts = sample_surface(tris, 40000, 11);
  REQUIRE(pts.size() == 40000);
  const auto upper = std::count_if(pts.begin(), pts.end(), [](const Vec3& p) { return p.z() > 1; });
  CHECK(double(upper) / pts.size() == doctest::Approx(0.75).epsilon(0.02));
  for (const auto& p : pts) {
    const Vec3 q = p.z() > 1 ? Vec3(p.x() / 3.0, p.y() / 2.0, 0) : Vec3(p.x() / 2.0, p.y(), 0);
    CHECK(q.x() + q.y() <= 1.0 + 1e-12);
  }
  CHECK(sample_surface(tris, 5, 11) == std::vector<Vec3>(pts.begin(), pts.begin() + 5));
}

TEST_CASE("chamfer: identity, symmetry and the offset sphere") {
  const TriangleSoup cube = triangles_of(shapes::box(Vec3(1, 1, 1), 3));
  CHECK(chamfer(cube, cube, 20000, 1) < 1e-12);

  TriangleSoup shifted = cube;
  for (auto& t : shifted) {
    for (auto& v : t) v.x() += 0.02;
  }
  const double ab = chamfer(cube, shifted, 100000, 2);
  const double ba = chamfer(shifted, cube, 100000, 2);
  CHECK(ab > 0.0);
  CHECK(std::abs(ab - ba) < 0.05 * ab);

  // Offsetting a fine sphere by eps gives squared distance eps^2 on both sides;
  // normalization divides lengths by mesh a's bounding-box diagonal.
  const TriMesh sphere = shapes::icosphere(1.0, 5);
  TriMesh grown = sphere;
  const double eps = 0.01;
  for (auto& v : grown.vertices) v *= 1.0 + eps;
  const double diag = sphere.bbox_diagonal();
  const double expected = (eps / diag) * (eps / diag);
  const double cd = chamfer(triangles_of(sphere), triangles_of(grown), 100000, 5);
  CHECK(std::abs(cd - expected) < 0.1 * expected);
}

TEST_CASE("chamfer is invariant under a common similarity transform") {
  const TriangleSoup a = triangles_of(shapes::box(Vec3(1, 2, 1), 2));
  TriangleSoup b = a;
  for (auto& t : b) {
    for (auto& v : t) v.z() += 0.05;
  }
  const double base = chamfer(a, b, 20000, 4);
  auto move = [&](TriangleSoup s) {
    for (auto& t : s) {
      for (auto& v : t) v = 5.0 * v + Vec3(-3, 1, 2);
    }
    return s;
  };
  // Rotations change the axis-aligned box, so only scale and translation are exact.
  CHECK(chamfer(move(a), move(b), 20000, 4) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("scaled_jacobian: squares, hand-computed quad and degenerate quads") {
  CHECK(scaled_jacobian(quad_grid(4, 3)) == doctest::Approx(0.0).epsilon(1e-15));

  QuadMesh q;
  q.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1.5, 1, 0), Vec3(0, 1, 0)};
  q.quads = {{0, 1, 2, 3}};
  // Independent oracle: interior angles from acos, min sine over corners.
  double min_sin = 1.0;
  for (int k = 0; k < 4; ++k) {
    const Vec3 a = q.vertices[(k + 1) % 4] - q.vertices[k];
    const Vec3 b = q.vertices[(k + 3) % 4] - q.vertices[k];
    min_sin = std::min(min_sin, std::sin(std::acos(a.dot(b) / (a.norm() * b.norm()))));
  }
  CHECK(min_sin == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-12));
  CHECK(scaled_jacobian(q) == doctest::Approx(1.0 - min_sin).epsilon(1e-12));
  CHECK(quad_min_jacobians(q)[0] == doctest::Approx(min_sin).epsilon(1e-12));

  QuadMesh flat = q;
  flat.vertices[2] = Vec3(1, 0, 0);
  flat.vertices[3] = Vec3(0, 0, 0);
  CHECK(scaled_jacobian(flat) == doctest::Approx(1.0));

  // A reflex (non-convex) corner scores 0.
  QuadMesh dart = q;
  dart.vertices = {Vec3(0, 0, 0), Vec3(2, 1, 0), Vec3(0, 2, 0), Vec3(0.5, 1, 0)};
  CHECK(quad_min_jacobians(dart)[0] == 0.0);
}

TEST_CASE("scaled_jacobian is invariant under rigid transforms") {
  QuadMesh qm = cube_quads();
  for (auto& v : qm.vertices) v += Vec3(0.03 * std::sin(7 * v.x()), 0.02 * v.y() * v.z(), 0.0);
  const double base = scaled_jacobian(qm);
  const Eigen::Matrix3d rot =
      Eigen::AngleAxisd(1.1, Vec3(-1, 2, 0.5).normalized()).toRotationMatrix();
  QuadMesh moved = qm;
  for (auto& v : moved.vertices) v = rot * v + Vec3(4, -2, 9);
  CHECK(std::abs(scaled_jacobian(moved) - base) < 1e-9);
  CHECK(base > 0.0);
  CHECK(base < 1.0);
}

TEST_CASE("metrics report: cube row and CSV round trip") {
  const TriMesh cube = shapes::unit_cube();
  const QuadMesh qm = cube_quads();
  MetricsOptions mo;
  mo.samples = 20000;
  const auto r = make_report(qm, cube, {{"lines", 0.25}, {"remesh", 1.0 / 3.0}}, mo);
  CHECK(r.v_count == 98);
  CHECK(r.f_count == 96);
  CHECK(r.singularities == 8);
  CHECK_FALSE(r.corrupt);
  CHECK(r.chamfer >= 0.0);
  CHECK(r.chamfer < 1e-4);
  CHECK(r.sj == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.quad_min_jacobian.size() == 96);
  CHECK(r.total_runtime() == doctest::Approx(0.25 + 1.0 / 3.0));

  const std::string header = metrics_csv_header(r);
  CHECK(header == "V,F,I,CD,SJ,Corruption,Runtime,t_lines,t_remesh");
  const auto back = parse_metrics_csv(header, metrics_csv_row(r));
  CHECK(back.v_count == r.v_count);
  CHECK(back.f_count == r.f_count);
  CHECK(back.singularities == r.singularities);
  CHECK(back.chamfer == r.chamfer);
  CHECK(back.sj == r.sj);
  CHECK(back.corrupt == r.corrupt);
  REQUIRE(back.runtime.size() == 2);
  CHECK(back.runtime[1].stage == "remesh");
  CHECK(back.runtime[1].seconds == 1.0 / 3.0);
  CHECK(metrics_csv_row(back) == metrics_csv_row(r));

  CHECK_THROWS_AS(parse_metrics_csv("V,F", "1,2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_metrics_csv(header, "1,2,3"), std::invalid_argument);
  CHECK_THROWS_AS(parse_metrics_csv("V,F,I,CD,SJ,Corruption,Runtime", "1,2,3,x,0,false,0"),
                  std::invalid_argument);
  CHECK(format_metrics_table(r).find("CD(1e-5)") != std::string::npos);
}
