#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lq {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Indexed triangle mesh with edge/face incidence tables. Immutable once built.
//
// Edges are stored as (low, high) vertex pairs, sorted lexicographically, so
// edge indices are stable for a given face list. face_edges[f][k] is the edge
// joining corners k and (k+1)%3 of face f.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::array<int, 2>> edges;
  std::vector<std::vector<int>> edge_faces;
  std::vector<std::array<int, 3>> face_edges;
  std::vector<Vec3> face_normals;
  std::vector<double> face_areas;
  std::vector<Vec3> vertex_normals;

  // Counters filled by build(); informational only.
  int dropped_duplicate_faces = 0;
  int dropped_degenerate_faces = 0;

  // Builds incidence tables. Faces with repeated indices and duplicate faces
  // (same vertex set) are dropped and counted. Throws MeshError on
  // out-of-range indices or when no face survives.
  static TriMesh build(std::vector<Vec3> vertices,
                       std::vector<std::array<int, 3>> faces);

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_faces() const { return static_cast<int>(faces.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }

  bool is_boundary_edge(int e) const { return edge_faces[e].size() == 1; }
  bool is_nonmanifold_edge(int e) const { return edge_faces[e].size() >= 3; }
  bool is_degenerate_face(int f) const { return face_areas[f] <= kDegenerateArea; }
  int count_nonmanifold_edges() const;
  int count_boundary_edges() const;

  // Index of edge {a, b}, or -1.
  int find_edge(int a, int b) const;
  // Faces sharing an edge with f (all of them, for non-manifold edges).
  std::vector<int> face_neighbors(int f) const;

  Vec3 edge_midpoint(int e) const;
  Vec3 edge_vector(int e) const;  // high - low
  double edge_length(int e) const { return edge_vector(e).norm(); }
  Vec3 face_centroid(int f) const;
  // Area-weighted average of the incident face normals, unit length.
  Vec3 edge_normal(int e) const;

  int euler_characteristic() const {
    return num_vertices() - num_edges() + num_faces();
  }
  // Number of edge-connected face components.
  int count_components() const;
  // Genus from Euler characteristic, assuming closed orientable components.
  int genus() const;

  double total_area() const;
  double bbox_diagonal() const;
  std::pair<Vec3, Vec3> bbox() const;

  static constexpr double kDegenerateArea = 1e-14;
};

struct SaliencyInfo {
  std::vector<double> dihedral;     // degrees; 0 for non two-face edges
  std::vector<int> salient_edges;   // sorted ascending
  std::vector<char> is_salient;     // per edge
  int degenerate_normal_warnings = 0;
};

// An edge is salient when it has exactly two faces whose normals differ by more
// than tau degrees, or when it is a boundary or non-manifold edge.
SaliencyInfo compute_saliency(const TriMesh& mesh, double tau_degrees);

struct FaceFrame {
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();
  Vec3 n = Vec3::UnitZ();
  bool valid = false;
};

// e1 = normalized first edge, e2 = n x e1.
std::vector<FaceFrame> face_frames(const TriMesh& mesh);

// Mesh text format: `v x y z` and 1-based `f i j k [l ...]`, `#` comments.
// Polygons are fan-triangulated.
TriMesh load_mesh(const std::filesystem::path& path);
TriMesh parse_mesh(const std::string& text);
void save_mesh(const std::filesystem::path& path, const TriMesh& mesh);

// Polygon soup in the same text format (used for quad output).
struct PolygonSoup {
  std::vector<Vec3> vertices;
  std::vector<std::vector<int>> polygons;  // 0-based
};
PolygonSoup parse_polygons(const std::string& text);
PolygonSoup load_polygons(const std::filesystem::path& path);
void save_polygons(const std::filesystem::path& path, const PolygonSoup& soup);
std::string format_polygons(const PolygonSoup& soup);

}  // namespace lq
