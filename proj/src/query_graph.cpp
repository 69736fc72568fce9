#include "lq/query_graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "lq/log.hpp"
#include "lq/rng.hpp"

namespace lq {

NeighborPointTable build_neighbor_table(const TriMesh& mesh) {
  NeighborPointTable t;
  t.num_vertices = mesh.num_vertices();
  t.positions.reserve(mesh.num_vertices() + mesh.num_edges());
  t.normals.reserve(mesh.num_vertices() + mesh.num_edges());
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    t.positions.push_back(mesh.vertices[v]);
    t.normals.push_back(mesh.vertex_normals[v]);
  }
  for (int e = 0; e < mesh.num_edges(); ++e) {
    t.positions.push_back(mesh.edge_midpoint(e));
    t.normals.push_back(mesh.edge_normal(e));
  }
  return t;
}

namespace {

// Drops the entries farthest from `center` (never the first one) until at
// most `cap` remain; survivors keep their order.
void cap_neighborhood(std::vector<int>& ids, int cap, const Vec3& center,
                      const std::vector<Vec3>& positions, int keep_front) {
  if (cap <= 0 || static_cast<int>(ids.size()) <= cap) return;
  std::vector<int> order(ids.size() - keep_front);
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i) + keep_front;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return (positions[ids[a]] - center).squaredNorm() < (positions[ids[b]] - center).squaredNorm();
  });
  std::vector<char> keep(ids.size(), 0);
  for (int i = 0; i < keep_front; ++i) keep[i] = 1;
  for (int i = 0; i < cap - keep_front; ++i) keep[order[i]] = 1;
  std::vector<int> out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (keep[i]) out.push_back(ids[i]);
  }
  ids = std::move(out);
}

}  // namespace

std::vector<EdgeQuery> build_edge_queries(const TriMesh& mesh, const SaliencyInfo& sal,
                                          int cap) {
  std::vector<Vec3> table_positions;
  table_positions.reserve(mesh.num_vertices() + mesh.num_edges());
  table_positions.insert(table_positions.end(), mesh.vertices.begin(), mesh.vertices.end());
  for (int e = 0; e < mesh.num_edges(); ++e) table_positions.push_back(mesh.edge_midpoint(e));
  const int nv = mesh.num_vertices();

  std::vector<EdgeQuery> out(mesh.num_edges());
  for (int e = 0; e < mesh.num_edges(); ++e) {
    EdgeQuery& q = out[e];
    q.edge_id = e;
    q.position = mesh.edge_midpoint(e);
    q.normal = mesh.edge_normal(e);
    q.prior_flag = e < static_cast<int>(sal.is_salient.size()) && sal.is_salient[e];
    auto& nb = q.neighborhood;
    nb.push_back(nv + e);
    auto add = [&nb](int id) {
      if (std::find(nb.begin(), nb.end(), id) == nb.end()) nb.push_back(id);
    };
    for (int f : mesh.edge_faces[e]) {
      for (int v : mesh.faces[f]) add(v);
      for (int fe : mesh.face_edges[f]) add(nv + fe);
    }
    cap_neighborhood(nb, cap, q.position, table_positions, 1);
  }
  return out;
}

std::vector<FaceQuery> build_face_queries(const TriMesh& mesh, int cap) {
  std::vector<Vec3> centroids(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) centroids[f] = mesh.face_centroid(f);
  std::vector<FaceQuery> out(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    FaceQuery& q = out[f];
    q.face_id = f;
    q.position = centroids[f];
    q.normal = mesh.face_normals[f];
    q.neighborhood = mesh.face_neighbors(f);
    cap_neighborhood(q.neighborhood, cap, q.position, centroids, 0);
  }
  return out;
}

std::vector<double> feature_distances(const TriMesh& mesh, const SaliencyInfo& sal) {
  const int nf = mesh.num_faces();
  std::vector<double> dist(nf, kNoFeature);
  std::vector<Vec3> centroid(nf);
  for (int f = 0; f < nf; ++f) centroid[f] = mesh.face_centroid(f);

  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (int e : sal.salient_edges) {
    const Vec3 mid = mesh.edge_midpoint(e);
    for (int f : mesh.edge_faces[e]) {
      const double d = (centroid[f] - mid).norm();
      if (d < dist[f]) dist[f] = d;
    }
  }
  for (int f = 0; f < nf; ++f) {
    if (dist[f] < kNoFeature) heap.emplace(dist[f], f);
  }
  while (!heap.empty()) {
    const auto [d, f] = heap.top();
    heap.pop();
    if (d > dist[f]) continue;
    for (int e : mesh.face_edges[f]) {
      for (int g : mesh.edge_faces[e]) {
        if (g == f) continue;
        const double nd = d + (centroid[f] - centroid[g]).norm();
        if (nd < dist[g]) {
          dist[g] = nd;
          heap.emplace(nd, g);
        }
      }
    }
  }
  return dist;
}

double feature_weight(double d, double rho, bool invert) {
  if (!(d >= 0.0)) throw std::invalid_argument("feature_weight: distance must be non-negative");
  const double decay = std::exp(-rho * d);
  return invert ? decay : 1.0 - decay;
}

TrainingSubsample sample_training_queries(std::span<const char> labels, int pos_ratio,
                                          int neg_ratio, int cap, uint64_t seed) {
  std::vector<int> pos, neg;
  for (size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(static_cast<int>(i));

  TrainingSubsample out;
  Rng rng(seed);
  // Partial Fisher-Yates: first k entries become a uniform k-subset.
  auto choose = [&rng](std::vector<int>& pool, int k) {
    k = std::min<int>(k, static_cast<int>(pool.size()));
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
  };

  cap = std::max(cap, 0);
  if (pos.empty()) {
    out.no_positive_warning = true;
    log_warn("training subsample has no positive edge labels");
    choose(neg, cap);
    out.negatives = static_cast<int>(neg.size());
    out.indices = neg;
  } else {
    const double pos_share = static_cast<double>(pos_ratio) / (pos_ratio + neg_ratio);
    int n_pos = static_cast<int>(pos.size());
    if (n_pos > static_cast<int>(cap * pos_share)) {
      n_pos = std::max(1, static_cast<int>(cap * pos_share));
    }
    n_pos = std::min(n_pos, cap);
    const int by_ratio = static_cast<int>(
        std::llround(static_cast<double>(n_pos) * neg_ratio / std::max(pos_ratio, 1)));
    const int n_neg = std::min({static_cast<int>(neg.size()), by_ratio, cap - n_pos});
    choose(pos, n_pos);
    choose(neg, n_neg);
    out.positives = static_cast<int>(pos.size());
    out.negatives = static_cast<int>(neg.size());
    out.indices = pos;
    out.indices.insert(out.indices.end(), neg.begin(), neg.end());
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

std::string dump_edge_queries(std::span<const EdgeQuery> queries) {
  std::ostringstream out;
  for (const auto& q : queries) {
    out << "E " << q.edge_id << ' ' << (q.label ? (*q.label ? "1" : "0") : "-") << ' '
        << (q.prior_flag ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string dump_face_queries(std::span<const FaceQuery> queries, std::span<const double> dist) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& q : queries) {
    out << "F " << q.face_id << ' ' << dist[q.face_id] << ' ' << q.feature_weight << '\n';
  }
  return out.str();
}

}  // namespace lq
