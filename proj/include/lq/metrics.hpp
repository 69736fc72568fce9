#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lq/mesh.hpp"
#include "lq/remeshing.hpp"

namespace lq {

// Irregular vertices of a quad mesh. Valence counts incident edges: interior
// vertices are regular at 4, boundary vertices at 3, and boundary corners of
// valence 2 are not counted. Vertices touching an edge with more than two
// quads are reported separately and never counted as irregular.
struct SingularityCount {
  int irregular = 0;
  int nonmanifold_vertices = 0;
};
SingularityCount count_singularities_detailed(const QuadMesh& qm);
int count_singularities(const QuadMesh& qm);

// Triangle soup used for distance queries; quads are split along 0-2.
using TriangleSoup = std::vector<std::array<Vec3, 3>>;
TriangleSoup triangles_of(const TriMesh& mesh);
TriangleSoup triangles_of(const QuadMesh& qm);

// Bounding-volume hierarchy answering exact closest-point queries.
class TriangleBvh {
 public:
  explicit TriangleBvh(TriangleSoup triangles);
  // Squared distance from p to the nearest triangle.
  double squared_distance(const Vec3& p) const;
  size_t size() const { return tris_.size(); }

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1, right = -1;  // children, or -1 for a leaf
    int begin = 0, end = 0;     // triangle range for leaves
  };
  int build(int begin, int end);

  TriangleSoup tris_;
  std::vector<Node> nodes_;
};

// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Area-uniform surface samples.
std::vector<Vec3> sample_surface(const TriangleSoup& tris, int count, uint64_t seed);

inline constexpr int kDefaultChamferSamples = 100000;

// Symmetric Chamfer distance: both meshes are mapped by the transform that
// sends mesh a's bounding box to unit diagonal, `samples` points are drawn on
// each side, and the result is the average of the two mean squared
// nearest-point distances.
double chamfer(const TriangleSoup& a, const TriangleSoup& b, int samples = kDefaultChamferSamples,
               uint64_t seed = 0);

// Per-quad minimum corner sine in the quad's best-fit plane, clamped to
// [0, 1]. Degenerate quads score 0 and log a warning.
std::vector<double> quad_min_jacobians(const QuadMesh& qm);
// Mean over quads of (1 - min corner sine): 0 for perfect squares.
double scaled_jacobian(const QuadMesh& qm);

struct StageTime {
  std::string stage;
  double seconds = 0.0;
};

struct MetricsReport {
  int v_count = 0;
  int f_count = 0;
  int singularities = 0;
  int nonmanifold_vertices = 0;
  double chamfer = 0.0;  // raw; tables display it in units of 1e-5
  double sj = 0.0;
  bool corrupt = false;
  std::vector<StageTime> runtime;
  std::vector<double> quad_min_jacobian;  // not serialized

  double total_runtime() const;
};

struct MetricsOptions {
  int samples = kDefaultChamferSamples;
  uint64_t seed = 0;
};

MetricsReport make_report(const QuadMesh& qm, const TriMesh& input,
                          std::vector<StageTime> timings, const MetricsOptions& options = {});

// CSV header and row: V,F,I,CD,SJ,Corruption,Runtime, then one column per
// stage named `t_<stage>`. Reals are written in shortest round-trip form.
std::string metrics_csv_header(const MetricsReport& report);
std::string metrics_csv_row(const MetricsReport& report);
// Parses a header line plus a row line; throws std::invalid_argument.
MetricsReport parse_metrics_csv(const std::string& header, const std::string& row);
// Aligned human-readable table (CD shown x1e5).
std::string format_metrics_table(const MetricsReport& report);

}  // namespace lq
