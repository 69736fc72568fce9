#pragma once

#include <complex>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lq/mesh.hpp"
#include "lq/query_graph.hpp"

namespace lq {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kHalfPi = kPi / 2.0;

// Representative cross direction per face, angle from FaceFrame::e1 towards
// e2, in [0, pi/2). Invalid entries sit on degenerate faces.
struct CrossField {
  std::vector<double> theta;
  std::vector<char> valid;

  int size() const { return static_cast<int>(theta.size()); }
};

// Maps any finite angle into [0, pi/2).
double canonical_angle(double a);
// Wraps into (-pi, pi].
double wrap_pi(double a);

struct PolyVector {
  std::complex<double> c0;
  std::complex<double> c1;

  FieldTarget to_target() const { return {c0.real(), c0.imag(), c1.real(), c1.imag()}; }
  static PolyVector from_target(const FieldTarget& t) {
    return {{t[0], t[1]}, {t[2], t[3]}};
  }
};

// u = e^{i theta}, v = i u; c0 = -(u^2 + v^2), c1 = u^2 v^2.
PolyVector encode_polyvector(double theta);
// arg(-c1) / 4 in [0, pi/2); nullopt when |c1| <= 1e-12.
std::optional<double> decode_polyvector(const PolyVector& pv);

// Rotation r such that a direction at angle t in f's frame, flattened across
// the shared edge, has angle t + r in g's frame. Result in (-pi, pi].
// Throws std::invalid_argument when f and g share no edge.
double transport_angle(const TriMesh& mesh, std::span<const FaceFrame> frames, int f, int g);

// Per-face optional fixed theta.
using FieldConstraints = std::vector<std::optional<double>>;

struct FieldSolveReport {
  int sweeps = 0;
  bool converged = false;
  double max_change = 0.0;
  std::vector<double> energy;  // energy before the first sweep and after each sweep
};

struct FieldSolveOptions {
  int max_sweeps = 200;
  double tol = 1e-7;
  bool record_energy = false;
};

// sum over adjacent valid pairs (f, g) of |z_f - e^{4i r_gf} z_g|^2, z = e^{4i theta}.
double field_energy(const TriMesh& mesh, std::span<const FaceFrame> frames, const CrossField& field);

// Smooth cross field honoring the constraints. Free faces start from the
// transported average of already filled neighbors, filled in layers outward
// from the constraints; a component without constraints is seeded at its
// lowest face with theta = 0. Sweeps are simultaneous updates
// z_f <- normalize(deg(f) z_f + sum_g e^{4i r_gf} z_g); the self term keeps the
// energy monotone and the result independent of face order.
CrossField oracle_field(const TriMesh& mesh, const FieldConstraints& constraints,
                        const FieldSolveOptions& options = {}, FieldSolveReport* report = nullptr);

// Constraints from structure edges: every face incident to one of them gets
// the edge direction angle (canonical). Longest incident edge wins, ties go to
// the lower edge index.
FieldConstraints align_to_structure(const TriMesh& mesh, std::span<const int> structure_edges);

struct SingularityReport {
  std::vector<double> raw_index;   // per vertex, NaN when skipped
  std::vector<double> index;       // quantized to multiples of 1/4, NaN when skipped
  std::vector<int> singular;       // vertices with nonzero quantized index
  std::vector<int> skipped;        // boundary, non-manifold, or invalid ring
  double raw_sum = 0.0;
};

SingularityReport singularity_index(const TriMesh& mesh, const CrossField& field);

// Text field file: header `# lq-field 1 frame=e1-first-edge faces=<n>`, then
// `<face_id> <theta>` with `nan` for invalid faces.
void save_field(const std::filesystem::path& path, const CrossField& field);
CrossField load_field(const std::filesystem::path& path);
// `<face_id> <c0.re> <c0.im> <c1.re> <c1.im>` per valid face.
std::string dump_polyvectors(const CrossField& field);

}  // namespace lq
