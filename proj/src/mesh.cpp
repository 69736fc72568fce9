#include "lq/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <sstream>

#include <Eigen/Geometry>

#include "lq/log.hpp"

namespace lq {

TriMesh TriMesh::build(std::vector<Vec3> vertices,
                       std::vector<std::array<int, 3>> faces) {
  TriMesh m;
  m.vertices = std::move(vertices);
  const int nv = m.num_vertices();

  std::map<std::array<int, 3>, int> seen;
  m.faces.reserve(faces.size());
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      if (f[k] < 0 || f[k] >= nv) {
        throw MeshError("face index out of range: " + std::to_string(f[k] + 1) +
                        " (mesh has " + std::to_string(nv) + " vertices)");
      }
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      ++m.dropped_degenerate_faces;
      continue;
    }
    std::array<int, 3> key = f;
    std::sort(key.begin(), key.end());
    if (!seen.emplace(key, 0).second) {
      ++m.dropped_duplicate_faces;
      continue;
    }
    m.faces.push_back(f);
  }
  if (m.faces.empty()) throw MeshError("mesh has zero faces");
  if (m.dropped_duplicate_faces > 0) {
    log_warn("dropped " + std::to_string(m.dropped_duplicate_faces) + " duplicate faces");
  }
  if (m.dropped_degenerate_faces > 0) {
    log_warn("dropped " + std::to_string(m.dropped_degenerate_faces) +
             " faces with repeated vertex indices");
  }

  const int nf = m.num_faces();
  struct HalfKey {
    int lo, hi, face, corner;
  };
  std::vector<HalfKey> halves;
  halves.reserve(3 * static_cast<size_t>(nf));
  for (int f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = m.faces[f][k];
      const int b = m.faces[f][(k + 1) % 3];
      halves.push_back({std::min(a, b), std::max(a, b), f, k});
    }
  }
  std::sort(halves.begin(), halves.end(), [](const HalfKey& x, const HalfKey& y) {
    if (x.lo != y.lo) return x.lo < y.lo;
    if (x.hi != y.hi) return x.hi < y.hi;
    return x.face < y.face;
  });
  m.face_edges.assign(nf, {-1, -1, -1});
  for (size_t i = 0; i < halves.size(); ++i) {
    const auto& h = halves[i];
    if (i == 0 || h.lo != halves[i - 1].lo || h.hi != halves[i - 1].hi) {
      m.edges.push_back({h.lo, h.hi});
      m.edge_faces.emplace_back();
    }
    const int e = m.num_edges() - 1;
    m.edge_faces[e].push_back(h.face);
    m.face_edges[h.face][h.corner] = e;
  }

  m.face_normals.resize(nf);
  m.face_areas.resize(nf);
  m.vertex_normals.assign(nv, Vec3::Zero());
  for (int f = 0; f < nf; ++f) {
    const auto& t = m.faces[f];
    const Vec3 c = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
    const double len = c.norm();
    m.face_areas[f] = 0.5 * len;
    m.face_normals[f] = len > 0.0 && 0.5 * len > kDegenerateArea ? Vec3(c / len) : Vec3::Zero();
    for (int k = 0; k < 3; ++k) m.vertex_normals[t[k]] += 0.5 * c;
  }
  for (auto& n : m.vertex_normals) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
  }
  return m;
}

int TriMesh::count_nonmanifold_edges() const {
  return static_cast<int>(std::count_if(edge_faces.begin(), edge_faces.end(),
                                        [](const auto& ef) { return ef.size() >= 3; }));
}

int TriMesh::count_boundary_edges() const {
  return static_cast<int>(std::count_if(edge_faces.begin(), edge_faces.end(),
                                        [](const auto& ef) { return ef.size() == 1; }));
}

int TriMesh::find_edge(int a, int b) const {
  const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
  auto it = std::lower_bound(edges.begin(), edges.end(), key);
  if (it == edges.end() || *it != key) return -1;
  return static_cast<int>(it - edges.begin());
}

std::vector<int> TriMesh::face_neighbors(int f) const {
  std::vector<int> out;
  for (int e : face_edges[f]) {
    for (int g : edge_faces[e]) {
      if (g != f && std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
    }
  }
  return out;
}

Vec3 TriMesh::edge_midpoint(int e) const {
  return 0.5 * (vertices[edges[e][0]] + vertices[edges[e][1]]);
}

Vec3 TriMesh::edge_vector(int e) const {
  return vertices[edges[e][1]] - vertices[edges[e][0]];
}

Vec3 TriMesh::face_centroid(int f) const {
  const auto& t = faces[f];
  return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
}

Vec3 TriMesh::edge_normal(int e) const {
  Vec3 n = Vec3::Zero();
  for (int f : edge_faces[e]) n += face_areas[f] * face_normals[f];
  const double len = n.norm();
  if (len > 0.0) return n / len;
  // Opposing faces (e.g. a folded sheet) cancel out; fall back to the first one.
  for (int f : edge_faces[e]) {
    if (face_normals[f].squaredNorm() > 0.0) return face_normals[f];
  }
  return Vec3::UnitZ();
}

int TriMesh::count_components() const {
  std::vector<int> comp(num_faces(), -1);
  int count = 0;
  std::vector<int> stack;
  for (int s = 0; s < num_faces(); ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      const int f = stack.back();
      stack.pop_back();
      for (int e : face_edges[f]) {
        for (int g : edge_faces[e]) {
          if (comp[g] < 0) {
            comp[g] = count;
            stack.push_back(g);
          }
        }
      }
    }
    ++count;
  }
  return count;
}

int TriMesh::genus() const {
  return (2 * count_components() - euler_characteristic()) / 2;
}

double TriMesh::total_area() const {
  double a = 0.0;
  for (double x : face_areas) a += x;
  return a;
}

std::pair<Vec3, Vec3> TriMesh::bbox() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return {lo, hi};
}

double TriMesh::bbox_diagonal() const {
  const auto [lo, hi] = bbox();
  return (hi - lo).norm();
}

SaliencyInfo compute_saliency(const TriMesh& mesh, double tau_degrees) {
  SaliencyInfo s;
  const int ne = mesh.num_edges();
  s.dihedral.assign(ne, 0.0);
  s.is_salient.assign(ne, 0);
  for (int e = 0; e < ne; ++e) {
    const auto& ef = mesh.edge_faces[e];
    if (ef.size() != 2) {
      s.is_salient[e] = 1;
      continue;
    }
    const Vec3& n0 = mesh.face_normals[ef[0]];
    const Vec3& n1 = mesh.face_normals[ef[1]];
    if (n0.squaredNorm() == 0.0 || n1.squaredNorm() == 0.0) {
      ++s.degenerate_normal_warnings;
      continue;
    }
    // Half-angle form: exactly symmetric in (n0, n1), accurate near 0 and 180.
    const double angle =
        2.0 * std::atan2((n0 - n1).norm(), (n0 + n1).norm()) * 180.0 / std::numbers::pi;
    s.dihedral[e] = angle;
    if (angle > tau_degrees) s.is_salient[e] = 1;
  }
  for (int e = 0; e < ne; ++e) {
    if (s.is_salient[e]) s.salient_edges.push_back(e);
  }
  if (s.degenerate_normal_warnings > 0) {
    log_warn(std::to_string(s.degenerate_normal_warnings) +
             " edges touch degenerate faces; dihedral treated as 0");
  }
  return s;
}

std::vector<FaceFrame> face_frames(const TriMesh& mesh) {
  std::vector<FaceFrame> frames(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (mesh.is_degenerate_face(f)) continue;
    const auto& t = mesh.faces[f];
    FaceFrame& fr = frames[f];
    fr.n = mesh.face_normals[f];
    fr.e1 = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).normalized();
    fr.e2 = fr.n.cross(fr.e1);
    fr.valid = true;
  }
  return frames;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MeshError("cannot open mesh file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int parse_index(const std::string& tok, int nv, int line_no) {
  const std::string head = tok.substr(0, tok.find('/'));
  int idx = 0;
  try {
    size_t used = 0;
    idx = std::stoi(head, &used);
    if (used != head.size()) throw std::invalid_argument(tok);
  } catch (const std::exception&) {
    throw MeshError("line " + std::to_string(line_no) + ": bad face index '" + tok + "'");
  }
  if (idx < 0) idx = nv + idx + 1;
  if (idx < 1 || idx > nv) {
    throw MeshError("line " + std::to_string(line_no) + ": face index out of range: " + tok);
  }
  return idx - 1;
}

}  // namespace

PolygonSoup parse_polygons(const std::string& text) {
  PolygonSoup soup;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  // Faces may reference vertices defined later; resolve after the pass.
  std::vector<std::pair<int, std::vector<std::string>>> raw_faces;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) {
        throw MeshError("line " + std::to_string(line_no) + ": malformed vertex");
      }
      soup.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<std::string> toks;
      std::string tok;
      while (ls >> tok) toks.push_back(tok);
      raw_faces.emplace_back(line_no, std::move(toks));
    }
  }
  const int nv = static_cast<int>(soup.vertices.size());
  for (auto& [ln, toks] : raw_faces) {
    std::vector<int> poly;
    for (const auto& t : toks) poly.push_back(parse_index(t, nv, ln));
    if (poly.size() < 3) {
      log_warn("line " + std::to_string(ln) + ": face with fewer than 3 vertices skipped");
      continue;
    }
    soup.polygons.push_back(std::move(poly));
  }
  return soup;
}

PolygonSoup load_polygons(const std::filesystem::path& path) {
  return parse_polygons(read_file(path));
}

TriMesh parse_mesh(const std::string& text) {
  PolygonSoup soup = parse_polygons(text);
  std::vector<std::array<int, 3>> tris;
  for (const auto& p : soup.polygons) {
    for (size_t k = 1; k + 1 < p.size(); ++k) tris.push_back({p[0], p[k], p[k + 1]});
  }
  return TriMesh::build(std::move(soup.vertices), std::move(tris));
}

TriMesh load_mesh(const std::filesystem::path& path) { return parse_mesh(read_file(path)); }

std::string format_polygons(const PolygonSoup& soup) {
  std::string out;
  char buf[128];
  for (const auto& v : soup.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out += buf;
  }
  for (const auto& p : soup.polygons) {
    out += 'f';
    for (int i : p) {
      out += ' ';
      out += std::to_string(i + 1);
    }
    out += '\n';
  }
  return out;
}

void save_polygons(const std::filesystem::path& path, const PolygonSoup& soup) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MeshError("cannot write mesh file: " + path.string());
  out << format_polygons(soup);
}

void save_mesh(const std::filesystem::path& path, const TriMesh& mesh) {
  PolygonSoup soup;
  soup.vertices = mesh.vertices;
  for (const auto& f : mesh.faces) soup.polygons.push_back({f[0], f[1], f[2]});
  save_polygons(path, soup);
}

}  // namespace lq
