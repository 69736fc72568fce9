#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lq/crossfield.hpp"
#include "lq/mesh.hpp"
#include "lq/train.hpp"

namespace lq {

enum class ShapeKind { kCube, kBoxGrid, kCylinder, kLBracket, kFusedBoxes };

std::optional<ShapeKind> parse_shape_kind(std::string_view name);
std::string shape_kind_name(ShapeKind kind);

struct ShapeParams {
  Vec3 size = Vec3(1, 1, 1);
  int subdiv = 4;
};

// Shape with ground truth: labels are the generator's crease edges (dihedral
// above tau), field is the oracle field aligned to them.
struct SynthSample {
  std::string name;
  TriMesh mesh;
  std::vector<char> labels;
  CrossField field;
};

TriMesh synth_mesh(ShapeKind kind, const ShapeParams& params);
SynthSample synthesize(ShapeKind kind, const ShapeParams& params, double tau_degrees = 30.0,
                       std::string name = {});

struct CorpusSpec {
  std::vector<ShapeKind> generators = {ShapeKind::kCube};
  int count = 1;
  uint64_t seed = 0;
  int subdiv = 4;
  double aspect_min = 0.5;
  double aspect_max = 2.0;
  double tau_degrees = 30.0;
};

// Shape i uses generators[i % size] with aspect ratios drawn from
// [aspect_min, aspect_max] (the first axis stays 1).
std::vector<SynthSample> generate_corpus(const CorpusSpec& spec);

// Writes `<name>.obj`, `<name>.struct`, `<name>.field` per sample and
// `manifest.txt`; returns the manifest path.
std::filesystem::path write_corpus(const std::filesystem::path& dir,
                                   const std::vector<SynthSample>& samples);

}  // namespace lq
