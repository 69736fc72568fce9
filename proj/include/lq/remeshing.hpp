#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "lq/crossfield.hpp"
#include "lq/mesh.hpp"

namespace lq {

// --- Structure lines -----------------------------------------------------------

struct Polyline {
  std::vector<int> vertices;  // edges.size() + 1 entries; first == last when closed
  std::vector<int> edges;
  bool closed = false;
};

// Every structural edge belongs to exactly one polyline. Junctions are the
// vertices whose structural degree is not 2, sorted ascending.
struct StructLineGraph {
  std::vector<char> structural;  // per edge
  std::vector<int> structural_edges;
  std::vector<Polyline> polylines;
  std::vector<int> junctions;
  int pruned_edges = 0;
};

struct LineOptions {
  double threshold = 0.5;
  int min_chain = 3;
};

// Selects edges with probability >= threshold, prunes chains shorter than
// min_chain whose ends touch neither a junction nor the mesh boundary, then
// chains the rest into maximal polylines. Throws std::invalid_argument when
// probs has the wrong size or leaves [0, 1].
StructLineGraph extract_lines(const TriMesh& mesh, std::span<const double> probs,
                              const LineOptions& options = {});

// Chains an arbitrary edge mask into polylines without pruning.
StructLineGraph chain_lines(const TriMesh& mesh, std::vector<char> structural);

// --- Patches -------------------------------------------------------------------

struct Patch {
  std::vector<int> faces;     // sorted
  std::vector<int> boundary;  // vertex loop, patch on the left; empty unless disk
  bool disk = false;

  // Filled by parametrize_patch.
  std::array<int, 4> corners{};  // loop positions, rectangle corners (0,0),(U,0),(U,V),(0,V)
  int corner_count = 0;
  double orientation = 0.0;      // field angle in the reference face frame
  std::vector<int> vertices;     // sorted mesh vertex ids
  std::vector<Vec2> param;       // aligned with vertices
  Vec2 extent = Vec2::Zero();    // (U, V)
  int flipped_triangles = 0;
  bool has_param = false;

  bool unmeshable = false;
  std::string issue;
};

// Patch decomposition. `cut` marks every edge that separates patches or lies
// on the mesh boundary; it is the edge set the output quads must respect.
struct Layout {
  std::vector<Patch> patches;  // ordered by smallest face id
  std::vector<int> face_patch;
  std::vector<char> cut;
  int added_cut_edges = 0;  // from splitting non-disk regions
  int demoted_edges = 0;    // structural edges with the same patch on both sides
};

struct PartitionOptions {
  int max_split_depth = 8;
};

// Flood fill over face adjacency that never crosses structural, boundary or
// non-manifold edges. Non-disk regions are bisected along dual Voronoi cuts
// up to max_split_depth times; survivors are flagged unmeshable.
Layout partition(const TriMesh& mesh, const StructLineGraph& lines,
                 const PartitionOptions& options = {});

// Vertex loop of a face set when it is a topological disk, else empty.
std::vector<int> disk_boundary(const TriMesh& mesh, std::span<const int> faces);

// Picks four corners (layout junctions first, then sharpest turns, then
// arc-length spread), labels them so the u side follows the field and maps
// the patch to a U x V rectangle: boundary by arc length, interior by a
// cotangent Laplace solve. Failures set unmeshable with a reason.
void parametrize_patch(const TriMesh& mesh, Patch& patch, const CrossField& field,
                       std::span<const char> is_junction);
void parametrize_patch(const TriMesh& mesh, std::span<const FaceFrame> frames, Patch& patch,
                       const CrossField& field, std::span<const char> is_junction);

// Layout degree != 2 per vertex (degree counts cut edges).
std::vector<char> layout_junctions(const TriMesh& mesh, const Layout& layout);

// --- Intervals -----------------------------------------------------------------

// Chain of cut edges between two layout nodes (junctions and patch corners).
struct Segment {
  std::vector<int> vertices;
  std::vector<int> edges;
  double length = 0.0;
  bool mesh_boundary = false;
  bool nonmanifold = false;
  std::vector<int> patches;  // adjacent patches, ascending
};

struct SideRef {
  int segment = -1;
  bool forward = true;
};

struct IntervalPlan {
  std::vector<Segment> segments;
  std::vector<int> count;                                   // per segment, >= 1
  std::vector<std::array<std::vector<SideRef>, 4>> sides;   // per patch
  std::vector<char> is_node;                                // per vertex
  int rounds = 0;
  int residual_mismatches = 0;
  int t_transitions = 0;
};

// n = max(1, round(length / target_len)) per segment, then opposite sides of
// every meshable patch are pulled to their rounded average for at most 10
// rounds. Leftover even mismatches become 3-to-1 transitions; anything else
// marks the patch unmeshable.
IntervalPlan assign_intervals(const TriMesh& mesh, Layout& layout, double target_len);

// Side total of patch p, side k (0..3).
int side_count(const IntervalPlan& plan, int patch, int side);

// --- Quad extraction -------------------------------------------------------------

enum class VertexSource : uint8_t { kLine = 0, kInterior = 1 };

struct QuadMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> quads;
  std::vector<VertexSource> provenance;
  std::vector<char> on_mesh_boundary;  // lies on a boundary segment of the input
  std::vector<char> on_nonmanifold;    // lies on a non-manifold segment of the input
  std::vector<int> quad_patch;
};

struct ExtractOptions {
  // Off only for fault injection: every patch then owns its line vertices.
  bool share_line_vertices = true;
  double max_snap_fraction = 0.1;
};

struct ExtractStats {
  int snapped = 0;
  int flagged_patches = 0;
};

QuadMesh extract_quads(const TriMesh& mesh, Layout& layout, const IntervalPlan& plan,
                       const ExtractOptions& options = {}, ExtractStats* stats = nullptr);

PolygonSoup to_polygons(const QuadMesh& qm);
// Quad mesh from a polygon soup; throws MeshError on non-quad polygons.
QuadMesh quad_mesh_from_polygons(const PolygonSoup& soup);

struct CorruptionReport {
  bool corrupt = false;
  int duplicate_quads = 0;
  int repeated_vertex_quads = 0;
  int nonmanifold_edges = 0;
  int fracture_edges = 0;
  int flipped_quads = 0;
};

// Duplicate quads, repeated vertices, edges with more than two quads (except
// along non-manifold input lines), open edges on interior lines, and quads
// whose normal opposes the average of their edge neighborhood.
CorruptionReport corruption_check(const QuadMesh& qm);

// --- Driver --------------------------------------------------------------------

struct RemeshOptions {
  LineOptions lines;
  PartitionOptions partition;
  ExtractOptions extract;
  double target_len = 0.0;  // <= 0: 2% of the bounding-box diagonal
};

struct UnmeshablePatch {
  int patch = -1;
  int faces = 0;
  std::string reason;
};

struct RemeshReport {
  int structural_edges = 0;
  int polylines = 0;
  int pruned_edges = 0;
  int patches = 0;
  int added_cut_edges = 0;
  int demoted_edges = 0;
  double target_len = 0.0;
  int segments = 0;
  int interval_rounds = 0;
  int interval_mismatches = 0;
  int t_transitions = 0;
  int snapped_points = 0;
  std::vector<UnmeshablePatch> unmeshable;
  CorruptionReport corruption;
};

struct RemeshResult {
  QuadMesh quads;
  StructLineGraph lines;
  Layout layout;
  IntervalPlan plan;
  RemeshReport report;
};

RemeshResult remesh(const TriMesh& mesh, std::span<const double> edge_prob,
                    const CrossField& field, const RemeshOptions& options = {});
RemeshResult remesh_with_lines(const TriMesh& mesh, StructLineGraph lines,
                               const CrossField& field, const RemeshOptions& options = {});

std::string format_remesh_report(const RemeshReport& report);

}  // namespace lq
