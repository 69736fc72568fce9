#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "lq/query_graph.hpp"
#include "lq/rng.hpp"
#include "lq/shapes.hpp"

using namespace lq;

namespace {

SaliencyInfo saliency_from(const TriMesh& m, std::vector<int> edges) {
  SaliencyInfo s;
  s.dihedral.assign(m.num_edges(), 0.0);
  s.is_salient.assign(m.num_edges(), 0);
  std::sort(edges.begin(), edges.end());
  for (int e : edges) s.is_salient[e] = 1;
  s.salient_edges = std::move(edges);
  return s;
}

}  // namespace

TEST_CASE("neighbor table layout") {
  const TriMesh m = shapes::flat_grid(3, 2, 3.0, 2.0);
  const auto t = build_neighbor_table(m);
  CHECK(t.size() == static_cast<size_t>(m.num_vertices() + m.num_edges()));
  CHECK(t.positions[t.vertex_entry(5)] == m.vertices[5]);
  CHECK(t.positions[t.midpoint_entry(4)] == m.edge_midpoint(4));
}

TEST_CASE("edge neighborhoods: interior 9, boundary 6, own midpoint first") {
  const TriMesh m = shapes::flat_grid(4, 4, 1.0, 1.0);
  const SaliencyInfo s = compute_saliency(m, 30.0);
  const auto q = build_edge_queries(m, s);
  REQUIRE(q.size() == static_cast<size_t>(m.num_edges()));
  const int nv = m.num_vertices();
  for (int e = 0; e < m.num_edges(); ++e) {
    CHECK(q[e].neighborhood.front() == nv + e);
    CHECK(q[e].position == m.edge_midpoint(e));
    CHECK(q[e].prior_flag == static_cast<bool>(s.is_salient[e]));
    const std::set<int> uniq(q[e].neighborhood.begin(), q[e].neighborhood.end());
    CHECK(uniq.size() == q[e].neighborhood.size());
    CHECK(q[e].neighborhood.size() == (m.is_boundary_edge(e) ? 6u : 9u));
  }
}

TEST_CASE("edge neighborhoods: non-manifold edge unions every incident face") {
  // Three triangles hinged on the edge (0,1).
  const TriMesh m = parse_mesh(
      "v 0 0 0\nv 1 0 0\nv 0.5 1 0\nv 0.5 -1 0\nv 0.5 0 1\n"
      "f 1 2 3\nf 2 1 4\nf 1 2 5\n");
  const int e = m.find_edge(0, 1);
  REQUIRE(m.is_nonmanifold_edge(e));
  const auto q = build_edge_queries(m, compute_saliency(m, 30.0));
  CHECK(q[e].neighborhood.size() == 5u + 7u);
  CHECK(q[e].prior_flag);
}

TEST_CASE("edge neighborhoods: cap drops the farthest entries") {
  // Fan of 12 triangles around edge (0,1) gives 1 + 13 vertices... capped.
  std::string text = "v 0 0 0\nv 1 0 0\n";
  for (int i = 0; i < 12; ++i) {
    const double a = 0.5 * i;
    text += "v 0.5 " + std::to_string((1 + i) * std::cos(a)) + " " +
            std::to_string((1 + i) * std::sin(a)) + "\n";
  }
  for (int i = 0; i < 12; ++i) text += "f 1 2 " + std::to_string(3 + i) + "\n";
  const TriMesh m = parse_mesh(text);
  const int e = m.find_edge(0, 1);
  const auto full = build_edge_queries(m, compute_saliency(m, 30.0), 1000);
  const auto capped = build_edge_queries(m, compute_saliency(m, 30.0), 8);
  CHECK(full[e].neighborhood.size() == 1u + 14u + 24u);
  REQUIRE(capped[e].neighborhood.size() == 8u);
  CHECK(capped[e].neighborhood.front() == m.num_vertices() + e);
  // Every kept entry is at least as close as every dropped one.
  const auto table = build_neighbor_table(m);
  double kept_max = 0.0, dropped_min = 1e30;
  for (int id : full[e].neighborhood) {
    const double d = (table.positions[id] - full[e].position).norm();
    const bool kept = std::count(capped[e].neighborhood.begin(), capped[e].neighborhood.end(), id);
    if (kept) kept_max = std::max(kept_max, d);
    else dropped_min = std::min(dropped_min, d);
  }
  CHECK(kept_max <= dropped_min);
}

TEST_CASE("face queries: grid interior 3, single triangle empty, tetrahedron all others") {
  const TriMesh grid = shapes::flat_grid(5, 5, 1.0, 1.0);
  const auto q = build_face_queries(grid);
  int interior = 0;
  for (const auto& fq : q) {
    bool boundary = false;
    for (int e : grid.face_edges[fq.face_id]) boundary |= grid.is_boundary_edge(e);
    if (!boundary) {
      CHECK(fq.neighborhood.size() == 3u);
      ++interior;
    }
    CHECK((fq.position - grid.face_centroid(fq.face_id)).norm() < 1e-15);
  }
  CHECK(interior > 0);

  const TriMesh tri = parse_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  const auto tq = build_face_queries(tri);
  REQUIRE(tq.size() == 1u);
  CHECK(tq[0].neighborhood.empty());

  const TriMesh tet = shapes::tetrahedron();
  for (const auto& fq : build_face_queries(tet)) {
    std::vector<int> nb = fq.neighborhood;
    std::sort(nb.begin(), nb.end());
    std::vector<int> expected;
    for (int g = 0; g < 4; ++g) {
      if (g != fq.face_id) expected.push_back(g);
    }
    CHECK(nb == expected);
  }
}

TEST_CASE("face neighborhoods are symmetric on manifold meshes") {
  const TriMesh m = shapes::torus(2.0, 0.5, 16, 8);
  const auto q = build_face_queries(m);
  CHECK(q.size() == static_cast<size_t>(m.num_faces()));
  for (const auto& fq : q) {
    for (int g : fq.neighborhood) {
      const auto& back = q[g].neighborhood;
      CHECK(std::find(back.begin(), back.end(), fq.face_id) != back.end());
    }
  }
}

TEST_CASE("feature_distances: strip with one salient end edge") {
  const int n = 6;
  const TriMesh m = shapes::flat_grid(n, 1, n, 1.0);
  // Left end edge: x = 0.
  const int end_edge = m.find_edge(0, n + 1);
  REQUIRE(end_edge >= 0);
  const auto d = feature_distances(m, saliency_from(m, {end_edge}));

  // Hand computation: triangles alternate along the strip with centroids
  // (i+1/3, 2/3) and (i+2/3, 1/3); the dual path zig-zags between them.
  const double start = std::sqrt(1.0 / 9.0 + 1.0 / 36.0);
  const double diag_step = std::sqrt(2.0) / 3.0;
  const double cross_step = std::sqrt(5.0) / 3.0;
  for (int f = 0; f < m.num_faces(); ++f) {
    const Vec3 c = m.face_centroid(f);
    const int cell = static_cast<int>(std::floor(c.x()));
    const bool upper = c.y() > 0.5;
    const double expected =
        start + cell * (diag_step + cross_step) + (upper ? 0.0 : diag_step);
    CHECK(d[f] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("feature_distances: sources, no features, and dual-graph triangle inequality") {
  const TriMesh cube = shapes::box(Vec3(1, 1, 1), 3);
  const SaliencyInfo s = compute_saliency(cube, 30.0);
  const auto d = feature_distances(cube, s);
  for (int e : s.salient_edges) {
    for (int f : cube.edge_faces[e]) {
      CHECK(d[f] == doctest::Approx((cube.face_centroid(f) - cube.edge_midpoint(e)).norm()));
    }
  }
  for (int f = 0; f < cube.num_faces(); ++f) {
    CHECK(d[f] > 0.0);
    for (int g : cube.face_neighbors(f)) {
      CHECK(d[g] <= d[f] + (cube.face_centroid(f) - cube.face_centroid(g)).norm() + 1e-12);
    }
  }

  const TriMesh sphere = shapes::icosphere(1.0, 2);
  const auto ds = feature_distances(sphere, compute_saliency(sphere, 30.0));
  for (double x : ds) {
    CHECK(std::isinf(x));
    CHECK(feature_weight(x, 10.0) == 1.0);
  }
}

TEST_CASE("feature_weight: closed forms, monotonicity, errors") {
  CHECK(feature_weight(0.0, 10.0) == 0.0);
  CHECK(std::abs(feature_weight(0.1, 10.0) - (1.0 - std::exp(-1.0))) < 1e-12);
  CHECK(std::abs(feature_weight(0.1, 10.0) - 0.632121) < 1e-6);
  CHECK(feature_weight(0.0, 10.0, true) == 1.0);
  CHECK_THROWS_AS(feature_weight(-1e-9, 10.0), std::invalid_argument);
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double a = rng.uniform() * 2.0, b = rng.uniform() * 2.0;
    const double da = feature_weight(a, 10.0), db = feature_weight(b, 10.0);
    CHECK(da >= 0.0);
    CHECK(da < 1.0 + 1e-300);
    if (a < b) CHECK(da <= db);
    if (a > b) CHECK(da >= db);
  }
}

TEST_CASE("sample_training_queries: 1:2 ratio, identity, determinism, no positives") {
  std::vector<char> labels(10100, 0);
  for (int i = 0; i < 100; ++i) labels[i * 101] = 1;
  const auto s = sample_training_queries(labels, 1, 2, 300, 17);
  CHECK(s.positives == 100);
  CHECK(s.negatives == 200);
  CHECK(s.indices.size() == 300u);
  CHECK(std::is_sorted(s.indices.begin(), s.indices.end()));
  int pos = 0;
  for (int i : s.indices) pos += labels[i];
  CHECK(pos == 100);
  CHECK(s.indices == sample_training_queries(labels, 1, 2, 300, 17).indices);
  CHECK(s.indices != sample_training_queries(labels, 1, 2, 300, 18).indices);

  std::vector<char> natural(30, 0);
  for (int i = 0; i < 10; ++i) natural[3 * i] = 1;
  const auto id = sample_training_queries(natural, 1, 2, 100, 1);
  CHECK(id.indices.size() == 30u);
  for (int i = 0; i < 30; ++i) CHECK(id.indices[i] == i);

  std::vector<char> none(50, 0);
  const auto neg = sample_training_queries(none, 1, 2, 20, 1);
  CHECK(neg.no_positive_warning);
  CHECK(neg.indices.size() == 20u);

  std::vector<char> many(1000, 1);
  for (int i = 0; i < 1000; i += 2) many[i] = 0;
  const auto capped = sample_training_queries(many, 1, 2, 90, 3);
  CHECK(capped.positives == 30);
  CHECK(capped.negatives == 60);
}

TEST_CASE("query dumps") {
  const TriMesh m = shapes::unit_cube();
  const SaliencyInfo s = compute_saliency(m, 30.0);
  auto eq = build_edge_queries(m, s);
  eq[0].label = true;
  const std::string dump = dump_edge_queries(eq);
  CHECK(dump.rfind("E 0 1 ", 0) == 0);
  CHECK(dump.find("E 1 - ") != std::string::npos);
  auto fq = build_face_queries(m);
  const auto d = feature_distances(m, s);
  for (auto& q : fq) q.feature_weight = feature_weight(d[q.face_id], 10.0);
  const std::string fd = dump_face_queries(fq, d);
  CHECK(std::count(fd.begin(), fd.end(), '\n') == 12);
  CHECK(fd.rfind("F 0 ", 0) == 0);
}
