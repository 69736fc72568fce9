#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lq/mesh.hpp"

namespace lq {

// Vertices first, then edge midpoints: index i < |V| is vertex i, index
// |V| + j is the midpoint of edge j.
struct NeighborPointTable {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  int num_vertices = 0;

  int vertex_entry(int v) const { return v; }
  int midpoint_entry(int e) const { return num_vertices + e; }
  size_t size() const { return positions.size(); }
};

NeighborPointTable build_neighbor_table(const TriMesh& mesh);

struct EdgeQuery {
  int edge_id = -1;
  Vec3 position;
  Vec3 normal;
  std::vector<int> neighborhood;  // into NeighborPointTable; own midpoint first
  bool prior_flag = false;
  std::optional<bool> label;
};

// Four polyvector reals (Re c0, Im c0, Re c1, Im c1).
using FieldTarget = std::array<double, 4>;

struct FaceQuery {
  int face_id = -1;
  Vec3 position;
  Vec3 normal;
  std::vector<int> neighborhood;  // adjacent face ids (their barycenters)
  double feature_weight = 1.0;
  std::optional<FieldTarget> target;
};

inline constexpr int kDefaultNeighborCap = 32;

// One query per edge. Neighborhood: vertices and edge midpoints of every
// incident face, deduplicated, capped at `cap` by dropping the entries
// farthest from the query.
std::vector<EdgeQuery> build_edge_queries(const TriMesh& mesh, const SaliencyInfo& sal,
                                          int cap = kDefaultNeighborCap);

// One query per face; neighborhood = edge-adjacent faces.
std::vector<FaceQuery> build_face_queries(const TriMesh& mesh, int cap = kDefaultNeighborCap);

inline constexpr double kNoFeature = std::numeric_limits<double>::infinity();

// Approximate geodesic distance from each face centroid to the nearest salient
// edge: Dijkstra on the face-adjacency graph, weights = centroid distances.
// Faces incident to a salient edge start at their centroid-to-midpoint
// distance. Without salient edges every entry is kNoFeature.
std::vector<double> feature_distances(const TriMesh& mesh, const SaliencyInfo& sal);

// 1 - exp(-rho d), or exp(-rho d) when `invert` is set. Throws
// std::invalid_argument for negative d.
double feature_weight(double d, double rho, bool invert = false);

struct TrainingSubsample {
  std::vector<int> indices;  // sorted ascending
  int positives = 0;
  int negatives = 0;
  bool no_positive_warning = false;
};

// Positive/negative subsample at ratio pos:neg (1:2 by default) with at most
// `cap` entries. Positives are kept whole whenever the cap allows.
TrainingSubsample sample_training_queries(std::span<const char> labels, int pos_ratio,
                                          int neg_ratio, int cap, uint64_t seed);

// Text dumps: `E <edge_id> <label|-> <prior>` and `F <face_id> <d> <Dp>`.
std::string dump_edge_queries(std::span<const EdgeQuery> queries);
std::string dump_face_queries(std::span<const FaceQuery> queries, std::span<const double> dist);

}  // namespace lq
