#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lq/mesh.hpp"

namespace lq {

enum class Provenance : uint8_t { kSalient = 0, kUniform = 1 };

// Surface samples with per-point normal, provenance and host primitive
// (edge index for salient samples, face index for uniform ones).
struct PointSet {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<Provenance> provenance;
  std::vector<uint32_t> host;

  size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  void push_back(const Vec3& p, const Vec3& n, Provenance prov, uint32_t host_id);
  void append(const PointSet& other);
  PointSet subset(std::span<const int> indices) const;
};

struct SalientSamples {
  PointSet points;
  // Set when the mesh has no salient edge; the caller should fall back to
  // uniform-only sampling.
  bool fallback = false;
};

// n_desire points along the salient edges. Per-edge counts are proportional
// to edge length (largest remainder rounding); points are stratified-jittered
// along each edge.
SalientSamples sample_salient(const TriMesh& mesh, const SaliencyInfo& sal, int n_desire,
                              uint64_t seed);

// Area-weighted face choice, then a uniform barycentric point in that face.
// Throws MeshError if the mesh has no area.
PointSet sample_uniform(const TriMesh& mesh, int n_desire, uint64_t seed);

// Greedy farthest point sampling starting at `start`. Returns min(k, n)
// indices; ties go to the lowest index.
std::vector<int> fps(std::span<const Vec3> points, int k, int start);
// Same, with the start index drawn from `seed`.
std::vector<int> fps(const PointSet& points, int k, uint64_t seed);

struct AnchorSet {
  PointSet points;  // uniform block first, then salient block
  int n_uniform = 0;
  int n_salient = 0;
};

// FPS(p_u, n_u) followed by FPS(p_a, n_a). When one pool is empty its budget
// moves to the other pool. Throws std::invalid_argument when both are empty.
AnchorSet build_anchor_set(const PointSet& p_u, const PointSet& p_a, int n_u, int n_a,
                           uint64_t seed);

// Binary columnar file: 8-byte magic, u64 count, then f64 positions, f32
// normals, u8 provenance and u32 host ids, all little-endian.
void write_pointset(const std::filesystem::path& path, const PointSet& points);
PointSet read_pointset(const std::filesystem::path& path);
std::string dump_pointset_text(const PointSet& points);

}  // namespace lq
