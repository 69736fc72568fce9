#include "lq/sampling.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lq/log.hpp"
#include "lq/rng.hpp"

namespace lq {

void PointSet::push_back(const Vec3& p, const Vec3& n, Provenance prov, uint32_t host_id) {
  positions.push_back(p);
  normals.push_back(n);
  provenance.push_back(prov);
  host.push_back(host_id);
}

void PointSet::append(const PointSet& other) {
  positions.insert(positions.end(), other.positions.begin(), other.positions.end());
  normals.insert(normals.end(), other.normals.begin(), other.normals.end());
  provenance.insert(provenance.end(), other.provenance.begin(), other.provenance.end());
  host.insert(host.end(), other.host.begin(), other.host.end());
}

PointSet PointSet::subset(std::span<const int> indices) const {
  PointSet out;
  for (int i : indices) out.push_back(positions[i], normals[i], provenance[i], host[i]);
  return out;
}

SalientSamples sample_salient(const TriMesh& mesh, const SaliencyInfo& sal, int n_desire,
                              uint64_t seed) {
  SalientSamples out;
  double total = 0.0;
  for (int e : sal.salient_edges) total += mesh.edge_length(e);
  if (sal.salient_edges.empty() || total <= 0.0 || n_desire <= 0) {
    out.fallback = true;
    return out;
  }

  // Largest remainder allocation of n_desire over edge lengths.
  const size_t m = sal.salient_edges.size();
  std::vector<int> count(m);
  std::vector<std::pair<double, size_t>> remainder(m);
  int assigned = 0;
  for (size_t i = 0; i < m; ++i) {
    const double quota = n_desire * mesh.edge_length(sal.salient_edges[i]) / total;
    count[i] = static_cast<int>(std::floor(quota));
    remainder[i] = {quota - count[i], i};
    assigned += count[i];
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int r = 0; r < n_desire - assigned; ++r) ++count[remainder[r].second];

  Rng rng(seed);
  for (size_t i = 0; i < m; ++i) {
    const int e = sal.salient_edges[i];
    const Vec3 a = mesh.vertices[mesh.edges[e][0]];
    const Vec3 d = mesh.edge_vector(e);
    const Vec3 n = mesh.edge_normal(e);
    for (int j = 0; j < count[i]; ++j) {
      const double t = (j + rng.uniform()) / count[i];
      out.points.push_back(a + t * d, n, Provenance::kSalient, static_cast<uint32_t>(e));
    }
  }
  return out;
}

PointSet sample_uniform(const TriMesh& mesh, int n_desire, uint64_t seed) {
  std::vector<double> cumulative(mesh.num_faces());
  double total = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    total += mesh.is_degenerate_face(f) ? 0.0 : mesh.face_areas[f];
    cumulative[f] = total;
  }
  if (total <= 0.0) throw MeshError("cannot sample a mesh with zero surface area");

  PointSet out;
  Rng rng(seed);
  for (int i = 0; i < n_desire; ++i) {
    const double target = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    // Zero-area faces have empty bins and are never returned by upper_bound.
    const int f =
        static_cast<int>(std::min<ptrdiff_t>(it - cumulative.begin(), mesh.num_faces() - 1));
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const auto& t = mesh.faces[f];
    const Vec3 p = (1.0 - r1) * mesh.vertices[t[0]] + r1 * (1.0 - r2) * mesh.vertices[t[1]] +
                   r1 * r2 * mesh.vertices[t[2]];
    out.push_back(p, mesh.face_normals[f], Provenance::kUniform, static_cast<uint32_t>(f));
  }
  return out;
}

std::vector<int> fps(std::span<const Vec3> points, int k, int start) {
  const int n = static_cast<int>(points.size());
  if (n == 0 || k <= 0) return {};
  k = std::min(k, n);
  std::vector<int> selected;
  selected.reserve(k);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  int current = std::clamp(start, 0, n - 1);
  std::vector<char> taken(n, 0);
  for (int s = 0; s < k; ++s) {
    selected.push_back(current);
    taken[current] = 1;
    const Vec3 c = points[current];
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < n; ++i) {
      const double d = (points[i] - c).squaredNorm();
      if (d < dist[i]) dist[i] = d;
      if (!taken[i] && dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    current = best;
  }
  return selected;
}

std::vector<int> fps(const PointSet& points, int k, uint64_t seed) {
  if (points.empty()) return {};
  Rng rng(seed);
  const int start = static_cast<int>(rng.below(points.size()));
  return fps(points.positions, k, start);
}

AnchorSet build_anchor_set(const PointSet& p_u, const PointSet& p_a, int n_u, int n_a,
                           uint64_t seed) {
  if (p_u.empty() && p_a.empty()) {
    throw std::invalid_argument("build_anchor_set: both point pools are empty");
  }
  AnchorSet out;
  auto take = [&](const PointSet& pool, int k, uint64_t stream) {
    const auto idx = fps(pool, k, derive_seed(seed, stream));
    if (static_cast<int>(idx.size()) < k) {
      log_warn("anchor pool smaller than requested: " + std::to_string(idx.size()) + " < " +
               std::to_string(k));
    }
    out.points.append(pool.subset(idx));
    return static_cast<int>(idx.size());
  };
  if (p_a.empty()) {
    out.n_uniform = take(p_u, n_u + n_a, 0);
  } else if (p_u.empty()) {
    out.n_salient = take(p_a, n_u + n_a, 1);
  } else {
    out.n_uniform = take(p_u, n_u, 0);
    out.n_salient = take(p_a, n_a, 1);
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'L', 'Q', 'P', 'T', 'S', 'E', 'T', '1'};

template <class T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw std::runtime_error("point set file truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_pointset(const std::filesystem::path& path, const PointSet& points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write point set: " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_le<uint64_t>(out, points.size());
  for (const auto& p : points.positions) {
    for (int k = 0; k < 3; ++k) put_le<double>(out, p[k]);
  }
  for (const auto& n : points.normals) {
    for (int k = 0; k < 3; ++k) put_le<float>(out, static_cast<float>(n[k]));
  }
  for (auto p : points.provenance) put_le<uint8_t>(out, static_cast<uint8_t>(p));
  for (auto h : points.host) put_le<uint32_t>(out, h);
}

PointSet read_pointset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open point set: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a point set file: " + path.string());
  }
  const auto n = get_le<uint64_t>(in);
  PointSet ps;
  ps.positions.resize(n);
  ps.normals.resize(n);
  ps.provenance.resize(n);
  ps.host.resize(n);
  for (auto& p : ps.positions) {
    for (int k = 0; k < 3; ++k) p[k] = get_le<double>(in);
  }
  for (auto& nr : ps.normals) {
    for (int k = 0; k < 3; ++k) nr[k] = get_le<float>(in);
  }
  for (auto& p : ps.provenance) p = static_cast<Provenance>(get_le<uint8_t>(in));
  for (auto& h : ps.host) h = get_le<uint32_t>(in);
  return ps;
}

std::string dump_pointset_text(const PointSet& points) {
  std::ostringstream out;
  out.precision(17);
  out << "# x y z nx ny nz provenance host\n";
  for (size_t i = 0; i < points.size(); ++i) {
    const auto& p = points.positions[i];
    const auto& n = points.normals[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << n.x() << ' ' << n.y() << ' ' << n.z()
        << ' ' << (points.provenance[i] == Provenance::kSalient ? "salient" : "uniform") << ' '
        << points.host[i] << '\n';
  }
  return out.str();
}

}  // namespace lq
