#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "lq/remeshing.hpp"
#include "lq/shapes.hpp"

using namespace lq;

namespace {

std::vector<double> salient_probs(const TriMesh& m) {
  const auto sal = compute_saliency(m, 30.0);
  std::vector<double> p(m.num_edges(), 0.0);
  for (int e : sal.salient_edges) p[e] = 1.0;
  return p;
}

CrossField constant_field(const TriMesh& m, const Vec3& dir) {
  const auto frames = face_frames(m);
  CrossField f{std::vector<double>(m.num_faces()), std::vector<char>(m.num_faces(), 1)};
  for (int i = 0; i < m.num_faces(); ++i) {
    f.theta[i] = canonical_angle(std::atan2(dir.dot(frames[i].e2), dir.dot(frames[i].e1)));
  }
  return f;
}

CrossField oracle(const TriMesh& m) {
  const auto sal = compute_saliency(m, 30.0);
  FieldSolveOptions opt;
  opt.max_sweeps = 1000;
  return oracle_field(m, align_to_structure(m, sal.salient_edges), opt);
}

RemeshOptions options_with_target(double target) {
  RemeshOptions o;
  o.target_len = target;
  return o;
}

// Single patch covering the whole mesh, parametrized with the given field.
Patch single_patch(const TriMesh& m, const CrossField& field) {
  Layout layout = partition(m, chain_lines(m, std::vector<char>(m.num_edges(), 0)));
  REQUIRE(layout.patches.size() == 1);
  Patch p = layout.patches[0];
  parametrize_patch(m, p, field, layout_junctions(m, layout));
  return p;
}

Vec2 param_of(const Patch& p, int v) {
  const auto it = std::lower_bound(p.vertices.begin(), p.vertices.end(), v);
  return p.param[it - p.vertices.begin()];
}

}  // namespace

TEST_CASE("extract_lines: cube edges form 12 polylines between 8 degree-3 junctions") {
  const TriMesh m = shapes::unit_cube();
  const auto g = extract_lines(m, salient_probs(m));
  CHECK(g.structural_edges.size() == 12);
  CHECK(g.polylines.size() == 12);
  CHECK(g.junctions.size() == 8);
  for (const auto& pl : g.polylines) {
    CHECK(pl.edges.size() == 1);
    CHECK_FALSE(pl.closed);
  }
  std::vector<int> degree(m.num_vertices(), 0);
  for (int e : g.structural_edges) {
    ++degree[m.edges[e][0]];
    ++degree[m.edges[e][1]];
  }
  for (int v : g.junctions) CHECK(degree[v] == 3);
}

TEST_CASE("extract_lines: empty selection, pruning and validation") {
  const TriMesh grid = shapes::flat_grid(6, 6, 1.0, 1.0);
  const std::vector<double> zeros(grid.num_edges(), 0.0);
  const auto empty = extract_lines(grid, zeros);
  CHECK(empty.structural_edges.empty());
  CHECK(empty.polylines.empty());
  CHECK(empty.junctions.empty());

  // One interior edge: a dangling chain of length 1 is pruned.
  std::vector<double> probs = zeros;
  const int v = 3 * 7 + 3;
  probs[grid.find_edge(v, v + 1)] = 0.9;
  auto g = extract_lines(grid, probs);
  CHECK(g.structural_edges.empty());
  CHECK(g.pruned_edges == 1);

  // A chain of three interior edges survives.
  probs[grid.find_edge(v + 1, v + 2)] = 0.7;
  probs[grid.find_edge(v - 1, v)] = 0.5;
  g = extract_lines(grid, probs);
  CHECK(g.structural_edges.size() == 3);
  CHECK(g.polylines.size() == 1);
  CHECK(g.polylines[0].vertices == std::vector<int>{v - 1, v, v + 1, v + 2});

  // A short chain touching the boundary is kept.
  std::vector<double> edge_probs = zeros;
  edge_probs[grid.find_edge(1, 8)] = 1.0;
  CHECK(extract_lines(grid, edge_probs).structural_edges.size() == 1);

  // Threshold is inclusive and configurable.
  LineOptions strict;
  strict.threshold = 0.8;
  CHECK(extract_lines(grid, probs, strict).structural_edges.empty());

  probs[0] = 1.5;
  CHECK_THROWS_AS(extract_lines(grid, probs), std::invalid_argument);
  CHECK_THROWS_AS(extract_lines(grid, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("extract_lines: closed loops") {
  const TriMesh cyl = shapes::cylinder(0.5, 1.0, 16, 4, 2);
  const auto g = extract_lines(cyl, salient_probs(cyl));
  CHECK(g.polylines.size() == 2);
  CHECK(g.junctions.empty());
  for (const auto& pl : g.polylines) {
    CHECK(pl.closed);
    CHECK(pl.edges.size() == 16);
    CHECK(pl.vertices.front() == pl.vertices.back());
  }
}

TEST_CASE("partition: cube sides, separated triangles, sphere without lines") {
  const TriMesh cube = shapes::unit_cube();
  const Layout cl = partition(cube, extract_lines(cube, salient_probs(cube)));
  REQUIRE(cl.patches.size() == 6);
  for (const auto& p : cl.patches) {
    CHECK(p.faces.size() == 2);
    CHECK(p.disk);
    CHECK(p.boundary.size() == 4);
  }
  CHECK(cl.added_cut_edges == 0);

  const TriMesh pair = TriMesh::build({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)},
                                      {{0, 1, 2}, {1, 3, 2}});
  std::vector<char> mask(pair.num_edges(), 0);
  mask[pair.find_edge(1, 2)] = 1;
  const Layout pl = partition(pair, chain_lines(pair, mask));
  CHECK(pl.patches.size() == 2);
  CHECK(pl.face_patch[0] != pl.face_patch[1]);

  const TriMesh sphere = shapes::icosphere(1.0, 2);
  const Layout sl = partition(sphere, chain_lines(sphere, std::vector<char>(sphere.num_edges(), 0)));
  CHECK(sl.patches.size() >= 2);
  CHECK(sl.added_cut_edges > 0);
  size_t faces = 0;
  for (const auto& p : sl.patches) {
    CHECK(p.disk);
    faces += p.faces.size();
  }
  CHECK(faces == static_cast<size_t>(sphere.num_faces()));
}

TEST_CASE("partition: torus and slit handling") {
  const TriMesh torus = shapes::torus(1.0, 0.3, 24, 12);
  const Layout tl = partition(torus, chain_lines(torus, std::vector<char>(torus.num_edges(), 0)));
  for (const auto& p : tl.patches) CHECK(p.disk);

  // A dangling line inside a flat grid does not separate anything: demoted.
  const TriMesh grid = shapes::flat_grid(6, 6, 1.0, 1.0);
  std::vector<char> mask(grid.num_edges(), 0);
  for (int i = 0; i < 3; ++i) mask[grid.find_edge(3 * 7 + i, 3 * 7 + i + 1)] = 1;
  const Layout gl = partition(grid, chain_lines(grid, mask));
  CHECK(gl.patches.size() == 1);
  CHECK(gl.demoted_edges == 3);
  CHECK(gl.patches[0].disk);
}

TEST_CASE("disk_boundary") {
  const TriMesh grid = shapes::flat_grid(3, 3, 1.0, 1.0);
  std::vector<int> all(grid.num_faces());
  for (int f = 0; f < grid.num_faces(); ++f) all[f] = f;
  const auto loop = disk_boundary(grid, all);
  CHECK(loop.size() == 12);
  CHECK(loop.front() == 0);
  CHECK(loop[1] == 1);  // patch on the left: counter-clockwise for +z
  // Removing the center quad leaves an annulus.
  std::vector<int> ring;
  for (int f : all) {
    if (f != 8 && f != 9) ring.push_back(f);
  }
  CHECK(disk_boundary(grid, ring).empty());
  const TriMesh cube = shapes::unit_cube();
  std::vector<int> closed(cube.num_faces());
  for (int f = 0; f < cube.num_faces(); ++f) closed[f] = f;
  CHECK(disk_boundary(cube, closed).empty());
}

TEST_CASE("parametrize_patch: flat square is the identity, field near 90 degrees is the same cross") {
  const TriMesh grid = shapes::flat_grid(8, 8, 1.0, 1.0);
  const Patch p = single_patch(grid, constant_field(grid, Vec3::UnitX()));
  REQUIRE(p.has_param);
  CHECK(p.extent.x() == doctest::Approx(1.0));
  CHECK(p.extent.y() == doctest::Approx(1.0));
  CHECK(p.flipped_triangles == 0);
  double dev = 0.0;
  for (int v = 0; v < grid.num_vertices(); ++v) {
    dev = std::max(dev, (param_of(p, v) - grid.vertices[v].head<2>()).cwiseAbs().maxCoeff());
  }
  CHECK(dev < 1e-6);

  const double a = 80.0 * kPi / 180.0;
  const Patch q = single_patch(grid, constant_field(grid, Vec3(std::cos(a), std::sin(a), 0.0)));
  REQUIRE(q.has_param);
  double same = 0.0;
  for (int v = 0; v < grid.num_vertices(); ++v) {
    const Vec3& x = grid.vertices[v];
    same = std::max(same, (param_of(q, v) - Vec2(x.x(), x.y())).cwiseAbs().maxCoeff());
  }
  CHECK(same < 1e-6);
}

TEST_CASE("parametrize_patch: rectangle aspect and harmonic interior") {
  const TriMesh grid = shapes::flat_grid(12, 6, 2.0, 1.0);
  const Patch p = single_patch(grid, constant_field(grid, Vec3::UnitX()));
  REQUIRE(p.has_param);
  CHECK(p.extent.x() == doctest::Approx(2.0));
  CHECK(p.extent.y() == doctest::Approx(1.0));
  CHECK(p.flipped_triangles == 0);
  for (int v = 0; v < grid.num_vertices(); ++v) {
    CHECK((param_of(p, v) - grid.vertices[v].head<2>()).norm() < 1e-6);
  }
}

TEST_CASE("parametrize_patch: 3-vertex boundary is unmeshable") {
  const TriMesh tri = TriMesh::build({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}});
  const Patch p = single_patch(tri, constant_field(tri, Vec3::UnitX()));
  CHECK(p.unmeshable);
  CHECK_FALSE(p.has_param);
  CHECK(p.issue.find("fewer than 4") != std::string::npos);
}

TEST_CASE("assign_intervals: rounding, clamp and the cube fixed point") {
  const TriMesh cube = shapes::unit_cube();
  const auto res = remesh(cube, salient_probs(cube), oracle(cube), options_with_target(0.25));
  CHECK(res.plan.segments.size() == 12);
  for (int n : res.plan.count) CHECK(n == 4);
  for (int p = 0; p < 6; ++p) {
    for (int k = 0; k < 4; ++k) CHECK(side_count(res.plan, p, k) == 4);
  }
  CHECK(res.plan.residual_mismatches == 0);

  std::vector<Vec3> small;
  for (const auto& v : cube.vertices) small.push_back(0.01 * v);
  const TriMesh tiny = TriMesh::build(small, cube.faces);
  const auto rt = remesh(tiny, salient_probs(tiny), oracle(tiny), options_with_target(0.25));
  for (int n : rt.plan.count) CHECK(n == 1);
  CHECK(rt.quads.quads.size() == 6);
  CHECK(rt.quads.vertices.size() == 8);
}

TEST_CASE("assign_intervals: T-junction sides are reconciled") {
  // Unit square split by a vertical line, left half split again horizontally.
  const TriMesh grid = shapes::flat_grid(8, 8, 1.0, 1.0);
  auto id = [](int i, int j) { return j * 9 + i; };
  std::vector<char> mask(grid.num_edges(), 0);
  for (int j = 0; j < 8; ++j) mask[grid.find_edge(id(4, j), id(4, j + 1))] = 1;
  for (int i = 0; i < 4; ++i) mask[grid.find_edge(id(i, 4), id(i + 1, 4))] = 1;
  const auto res = remesh_with_lines(grid, chain_lines(grid, mask), constant_field(grid, Vec3::UnitX()),
                                     options_with_target(0.3));
  REQUIRE(res.layout.patches.size() == 3);
  CHECK(res.report.unmeshable.empty());
  CHECK(res.plan.residual_mismatches == 0);
  CHECK(res.plan.rounds >= 1);
  for (int p = 0; p < 3; ++p) {
    CHECK(side_count(res.plan, p, 0) == side_count(res.plan, p, 2));
    CHECK(side_count(res.plan, p, 1) == side_count(res.plan, p, 3));
  }
  CHECK_FALSE(res.report.corruption.corrupt);
}

TEST_CASE("extract_quads: cube with four intervals per edge") {
  const TriMesh cube = shapes::unit_cube();
  const auto res = remesh(cube, salient_probs(cube), oracle(cube), options_with_target(0.25));
  const QuadMesh& qm = res.quads;
  CHECK(qm.quads.size() == 96);
  CHECK(qm.vertices.size() == 98);
  for (int p = 0; p < 6; ++p) CHECK(std::count(qm.quad_patch.begin(), qm.quad_patch.end(), p) == 16);
  const auto c = corruption_check(qm);
  CHECK_FALSE(c.corrupt);
  CHECK(res.report.unmeshable.empty());

  // Every quad edge is shared by exactly two quads (closed, watertight).
  std::map<std::pair<int, int>, int> edges;
  for (const auto& q : qm.quads) {
    for (int k = 0; k < 4; ++k) {
      const int a = q[k], b = q[(k + 1) % 4];
      ++edges[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [e, n] : edges) CHECK(n == 2);
  CHECK(static_cast<int>(qm.vertices.size()) - static_cast<int>(edges.size()) +
            static_cast<int>(qm.quads.size()) == 2);

  // Structure lines survive: every quarter point of every cube edge is a vertex.
  for (int e = 0; e < cube.num_edges(); ++e) {
    if (cube.edge_length(e) > 1.01) continue;
    for (int k = 0; k <= 4; ++k) {
      const Vec3 x = cube.vertices[cube.edges[e][0]] + 0.25 * k * cube.edge_vector(e);
      const bool found = std::any_of(qm.vertices.begin(), qm.vertices.end(),
                                     [&](const Vec3& v) { return (v - x).norm() < 1e-12; });
      CHECK(found);
    }
  }
  // Outward orientation is preserved.
  double volume = 0.0;
  for (const auto& q : qm.quads) {
    for (int t = 1; t < 3; ++t) {
      volume += qm.vertices[q[0]].dot(qm.vertices[q[t]].cross(qm.vertices[q[t + 1]])) / 6.0;
    }
  }
  CHECK(volume == doctest::Approx(1.0));
}

TEST_CASE("extract_quads: flat 2x2 and fault injection") {
  const TriMesh grid = shapes::flat_grid(4, 4, 1.0, 1.0);
  const CrossField field = constant_field(grid, Vec3::UnitX());
  const auto res = remesh_with_lines(grid, chain_lines(grid, std::vector<char>(grid.num_edges(), 0)),
                                     field, options_with_target(0.5));
  CHECK(res.quads.quads.size() == 4);
  CHECK(res.quads.vertices.size() == 9);
  CHECK_FALSE(res.report.corruption.corrupt);
  for (const auto& q : res.quads.quads) {
    std::set<int> s(q.begin(), q.end());
    CHECK(s.size() == 4);
  }

  // Two patches sharing a line: with the registry the line vertices are
  // shared, without it the seam opens.
  std::vector<char> mask(grid.num_edges(), 0);
  for (int j = 0; j < 4; ++j) mask[grid.find_edge(j * 5 + 2, (j + 1) * 5 + 2)] = 1;
  auto opts = options_with_target(0.25);
  const auto shared = remesh_with_lines(grid, chain_lines(grid, mask), field, opts);
  CHECK_FALSE(shared.report.corruption.corrupt);
  int line_vertices_on_both_sides = 0;
  for (size_t v = 0; v < shared.quads.vertices.size(); ++v) {
    if (std::abs(shared.quads.vertices[v].x() - 0.5) > 1e-12) continue;
    std::set<int> patches;
    for (size_t q = 0; q < shared.quads.quads.size(); ++q) {
      const auto& quad = shared.quads.quads[q];
      if (std::find(quad.begin(), quad.end(), static_cast<int>(v)) != quad.end()) {
        patches.insert(shared.quads.quad_patch[q]);
      }
    }
    line_vertices_on_both_sides += patches.size() == 2;
  }
  CHECK(line_vertices_on_both_sides == 5);

  opts.extract.share_line_vertices = false;
  const auto broken = remesh_with_lines(grid, chain_lines(grid, mask), field, opts);
  CHECK(broken.report.corruption.corrupt);
  CHECK(broken.report.corruption.fracture_edges > 0);
}

TEST_CASE("extract_quads: 3-to-1 transitions keep the output all-quad") {
  const TriMesh grid = shapes::flat_grid(6, 6, 1.0, 1.0);
  const CrossField field = constant_field(grid, Vec3::UnitX());
  Layout layout = partition(grid, chain_lines(grid, std::vector<char>(grid.num_edges(), 0)));
  const auto frames = face_frames(grid);
  const auto junction = layout_junctions(grid, layout);
  parametrize_patch(grid, frames, layout.patches[0], field, junction);
  IntervalPlan plan = assign_intervals(grid, layout, 1.0 / 3.0);
  REQUIRE(plan.segments.size() == 4);
  // Bottom side to 5 intervals, top stays at 3: one transition.
  const int bottom = plan.sides[0][0].front().segment;
  plan.count[bottom] = 5;
  const QuadMesh qm = extract_quads(grid, layout, plan);
  CHECK_FALSE(layout.patches[0].unmeshable);
  CHECK(qm.quads.size() == 2 + 4 + 3 + 3);
  const auto c = corruption_check(qm);
  CHECK_FALSE(c.corrupt);
  // Open boundary has 5 + 3 + 3 + 3 edges.
  std::map<std::pair<int, int>, int> edges;
  for (const auto& q : qm.quads) {
    for (int k = 0; k < 4; ++k) {
      const int a = q[k], b = q[(k + 1) % 4];
      ++edges[{std::min(a, b), std::max(a, b)}];
    }
  }
  int open = 0;
  for (const auto& [e, n] : edges) open += n == 1;
  CHECK(open == 14);

  // An odd mismatch cannot be fixed inside the patch.
  Layout again = partition(grid, chain_lines(grid, std::vector<char>(grid.num_edges(), 0)));
  parametrize_patch(grid, frames, again.patches[0], field, layout_junctions(grid, again));
  IntervalPlan odd = assign_intervals(grid, again, 1.0 / 3.0);
  odd.count[odd.sides[0][0].front().segment] = 4;
  const QuadMesh none = extract_quads(grid, again, odd);
  CHECK(none.quads.empty());
  CHECK(again.patches[0].unmeshable);
}

TEST_CASE("corruption_check detects each fault") {
  const TriMesh cube = shapes::unit_cube();
  const auto res = remesh(cube, salient_probs(cube), oracle(cube), options_with_target(0.25));
  QuadMesh dup = res.quads;
  dup.quads.push_back(dup.quads[5]);
  auto r = corruption_check(dup);
  CHECK(r.corrupt);
  CHECK(r.duplicate_quads == 1);

  QuadMesh rep = res.quads;
  rep.quads[0][1] = rep.quads[0][0];
  CHECK(corruption_check(rep).repeated_vertex_quads == 1);

  QuadMesh flipped = res.quads;
  std::reverse(flipped.quads[7].begin(), flipped.quads[7].end());
  r = corruption_check(flipped);
  CHECK(r.flipped_quads == 1);
  CHECK(r.corrupt);

  QuadMesh hole = res.quads;
  hole.quads.erase(hole.quads.begin() + 20);
  hole.quad_patch.erase(hole.quad_patch.begin() + 20);
  // Only interior vertices may border the hole; it is still a fracture if a
  // line vertex does.
  r = corruption_check(hole);
  CHECK(r.corrupt == (r.fracture_edges > 0));
}

TEST_CASE("remesh: cylinder, L-bracket and fused boxes complete") {
  for (const TriMesh& m : {shapes::cylinder(0.5, 1.0, 24, 8, 2), shapes::l_bracket(Vec3(1, 1, 1), 3),
                           shapes::fused_boxes(Vec3(1, 1, 1), 3)}) {
    const auto res = remesh(m, salient_probs(m), oracle(m), options_with_target(0.2));
    INFO(format_remesh_report(res.report));
    CHECK(res.quads.quads.size() > 0);
    CHECK((!res.report.corruption.corrupt || !res.report.unmeshable.empty()));
    for (const auto& q : res.quads.quads) {
      std::set<int> s(q.begin(), q.end());
      CHECK(s.size() == 4);
    }
  }
}

TEST_CASE("remesh is deterministic and validates its inputs") {
  const TriMesh m = shapes::l_bracket(Vec3(1, 1, 1), 3);
  const auto a = remesh(m, salient_probs(m), oracle(m));
  const auto b = remesh(m, salient_probs(m), oracle(m));
  CHECK(a.quads.vertices == b.quads.vertices);
  CHECK(a.quads.quads == b.quads.quads);
  CHECK(format_remesh_report(a.report) == format_remesh_report(b.report));
  CHECK(a.report.target_len == doctest::Approx(0.02 * m.bbox_diagonal()));
  CrossField short_field{{0.0}, {1}};
  CHECK_THROWS_AS(remesh(m, salient_probs(m), short_field), std::invalid_argument);
}

TEST_CASE("quad mesh polygon conversion") {
  const TriMesh cube = shapes::unit_cube();
  const auto res = remesh(cube, salient_probs(cube), oracle(cube), options_with_target(0.5));
  const PolygonSoup soup = to_polygons(res.quads);
  const QuadMesh back = quad_mesh_from_polygons(parse_polygons(format_polygons(soup)));
  CHECK(back.quads == res.quads.quads);
  PolygonSoup tri = soup;
  tri.polygons[0].pop_back();
  CHECK_THROWS_AS(quad_mesh_from_polygons(tri), MeshError);
}
