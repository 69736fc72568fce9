#include "lq/synth.hpp"

#include <cstdio>

#include "lq/rng.hpp"
#include "lq/shapes.hpp"

namespace lq {

namespace {

struct KindName {
  ShapeKind kind;
  const char* name;
};
constexpr KindName kKinds[] = {{ShapeKind::kCube, "cube"},
                               {ShapeKind::kBoxGrid, "box-grid"},
                               {ShapeKind::kCylinder, "cylinder"},
                               {ShapeKind::kLBracket, "l-bracket"},
                               {ShapeKind::kFusedBoxes, "fused-boxes"}};

}  // namespace

std::optional<ShapeKind> parse_shape_kind(std::string_view name) {
  for (const auto& k : kKinds) {
    if (name == k.name) return k.kind;
  }
  return std::nullopt;
}

std::string shape_kind_name(ShapeKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

TriMesh synth_mesh(ShapeKind kind, const ShapeParams& p) {
  const int s = std::max(1, p.subdiv);
  switch (kind) {
    case ShapeKind::kCube:
      return shapes::box(p.size, s);
    case ShapeKind::kBoxGrid: {
      // 2 x 2 x 1 block of cells: a box whose lattice is welded across cells.
      std::vector<std::array<int, 3>> cells;
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) cells.push_back({i, j, 0});
      }
      return shapes::voxel_surface(cells, Vec3(p.size.x() / 2, p.size.y() / 2, p.size.z()), s);
    }
    case ShapeKind::kCylinder:
      return shapes::cylinder(0.5 * p.size.x(), p.size.z(), 24, 2 * s, 2);
    case ShapeKind::kLBracket:
      return shapes::l_bracket(p.size, s);
    case ShapeKind::kFusedBoxes:
      return shapes::fused_boxes(p.size, s);
  }
  throw std::invalid_argument("unknown shape kind");
}

SynthSample synthesize(ShapeKind kind, const ShapeParams& params, double tau_degrees,
                       std::string name) {
  SynthSample s;
  s.name = name.empty() ? shape_kind_name(kind) : std::move(name);
  s.mesh = synth_mesh(kind, params);
  const SaliencyInfo sal = compute_saliency(s.mesh, tau_degrees);
  s.labels = sal.is_salient;
  FieldSolveOptions opt;
  opt.max_sweeps = 1000;
  s.field = oracle_field(s.mesh, align_to_structure(s.mesh, sal.salient_edges), opt);
  return s;
}

std::vector<SynthSample> generate_corpus(const CorpusSpec& spec) {
  if (spec.count < 1) throw std::invalid_argument("corpus count must be at least 1");
  if (spec.generators.empty()) throw std::invalid_argument("corpus needs at least one generator");
  if (!(spec.aspect_min > 0.0 && spec.aspect_min <= spec.aspect_max)) {
    throw std::invalid_argument("corpus aspect range must satisfy 0 < min <= max");
  }
  std::vector<SynthSample> out;
  for (int i = 0; i < spec.count; ++i) {
    const ShapeKind kind = spec.generators[i % spec.generators.size()];
    Rng rng(derive_seed(spec.seed, static_cast<uint64_t>(i)));
    ShapeParams p;
    p.subdiv = spec.subdiv;
    const double span = spec.aspect_max - spec.aspect_min;
    p.size = Vec3(1.0, spec.aspect_min + span * rng.uniform(), spec.aspect_min + span * rng.uniform());
    char name[64];
    std::snprintf(name, sizeof name, "%s_%04d", shape_kind_name(kind).c_str(), i);
    out.push_back(synthesize(kind, p, spec.tau_degrees, name));
  }
  return out;
}

std::filesystem::path write_corpus(const std::filesystem::path& dir,
                                   const std::vector<SynthSample>& samples) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("cannot create corpus directory: " + dir.string());
  }
  std::vector<ManifestEntry> entries;
  for (const auto& s : samples) {
    ManifestEntry e{s.name + ".obj", s.name + ".struct", s.name + ".field"};
    save_mesh(dir / e.mesh, s.mesh);
    save_struct_labels(dir / e.labels, s.mesh, s.labels);
    save_field(dir / e.field, s.field);
    entries.push_back(e);
  }
  const auto manifest = dir / "manifest.txt";
  save_manifest(manifest, entries);
  return manifest;
}

}  // namespace lq
