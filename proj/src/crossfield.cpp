#include "lq/crossfield.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lq {

double canonical_angle(double a) {
  double r = std::fmod(a, kHalfPi);
  if (r < 0.0) r += kHalfPi;
  if (r >= kHalfPi) r -= kHalfPi;
  return r;
}

double wrap_pi(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

PolyVector encode_polyvector(double theta) {
  const std::complex<double> u = std::polar(1.0, theta);
  const std::complex<double> v = std::complex<double>(0.0, 1.0) * u;
  const auto u2 = u * u, v2 = v * v;
  return {-(u2 + v2), u2 * v2};
}

std::optional<double> decode_polyvector(const PolyVector& pv) {
  if (!(std::abs(pv.c1) > 1e-12)) return std::nullopt;
  return canonical_angle(std::arg(-pv.c1) / 4.0);
}

namespace {

int shared_edge(const TriMesh& mesh, int f, int g) {
  for (int e : mesh.face_edges[f]) {
    for (int h : mesh.edge_faces[e]) {
      if (h == g) return e;
    }
  }
  return -1;
}

double edge_angle_in_frame(const Vec3& d, const FaceFrame& fr) {
  return std::atan2(d.dot(fr.e2), d.dot(fr.e1));
}

double transport_across(const TriMesh& mesh, std::span<const FaceFrame> frames, int e, int f,
                        int g) {
  const Vec3 d = mesh.edge_vector(e).normalized();
  return wrap_pi(edge_angle_in_frame(d, frames[g]) - edge_angle_in_frame(d, frames[f]));
}

struct Link {
  int other;
  std::complex<double> rot;  // e^{4i r_other->self}
  double r;                  // r_self->other
};

// Adjacency between valid faces, one entry per (face pair, shared edge).
std::vector<std::vector<Link>> build_links(const TriMesh& mesh, std::span<const FaceFrame> frames) {
  std::vector<std::vector<Link>> links(mesh.num_faces());
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const auto& fs = mesh.edge_faces[e];
    for (size_t i = 0; i < fs.size(); ++i) {
      for (size_t j = i + 1; j < fs.size(); ++j) {
        const int f = fs[i], g = fs[j];
        if (!frames[f].valid || !frames[g].valid) continue;
        const double r = transport_across(mesh, frames, e, f, g);
        links[f].push_back({g, std::polar(1.0, -4.0 * r), r});
        links[g].push_back({f, std::polar(1.0, 4.0 * r), -r});
      }
    }
  }
  return links;
}

double energy_of(const std::vector<std::vector<Link>>& links, const std::vector<std::complex<double>>& z,
                 const std::vector<char>& valid) {
  double total = 0.0;
  for (size_t f = 0; f < links.size(); ++f) {
    if (!valid[f]) continue;
    for (const auto& l : links[f]) {
      if (l.other < static_cast<int>(f)) continue;
      total += std::norm(z[f] - l.rot * z[l.other]);
    }
  }
  return total;
}

}  // namespace

double transport_angle(const TriMesh& mesh, std::span<const FaceFrame> frames, int f, int g) {
  const int e = (f == g) ? -1 : shared_edge(mesh, f, g);
  if (e < 0) throw std::invalid_argument("transport_angle: faces are not adjacent");
  return transport_across(mesh, frames, e, f, g);
}

double field_energy(const TriMesh& mesh, std::span<const FaceFrame> frames, const CrossField& field) {
  const auto links = build_links(mesh, frames);
  std::vector<std::complex<double>> z(field.size());
  for (int f = 0; f < field.size(); ++f) z[f] = std::polar(1.0, 4.0 * field.theta[f]);
  return energy_of(links, z, field.valid);
}

CrossField oracle_field(const TriMesh& mesh, const FieldConstraints& constraints,
                        const FieldSolveOptions& options, FieldSolveReport* report) {
  const int nf = mesh.num_faces();
  if (static_cast<int>(constraints.size()) != nf) {
    throw std::invalid_argument("oracle_field: constraint count does not match face count");
  }
  const auto frames = face_frames(mesh);
  const auto links = build_links(mesh, frames);

  CrossField field;
  field.theta.assign(nf, 0.0);
  field.valid.assign(nf, 0);
  std::vector<char> fixed(nf, 0), assigned(nf, 0);
  std::vector<std::complex<double>> z(nf), next(nf);
  for (int f = 0; f < nf; ++f) {
    field.valid[f] = frames[f].valid;
    if (frames[f].valid && constraints[f]) {
      fixed[f] = assigned[f] = 1;
      z[f] = std::polar(1.0, 4.0 * *constraints[f]);
    }
  }
  // Fill free faces layer by layer from their assigned neighbors. Each layer
  // reads only the previous one, so the result does not depend on face order.
  auto fill = [&]() {
    std::vector<int> layer;
    while (true) {
      layer.clear();
      for (int f = 0; f < nf; ++f) {
        if (!field.valid[f] || assigned[f]) continue;
        std::complex<double> sum = 0.0;
        bool touched = false;
        for (const auto& l : links[f]) {
          if (!assigned[l.other]) continue;
          sum += l.rot * z[l.other];
          touched = true;
        }
        if (!touched) continue;
        next[f] = std::abs(sum) > 1e-12 ? sum / std::abs(sum) : std::complex<double>(1.0, 0.0);
        layer.push_back(f);
      }
      if (layer.empty()) return;
      for (int f : layer) {
        z[f] = next[f];
        assigned[f] = 1;
      }
    }
  };
  fill();
  for (int f = 0; f < nf; ++f) {
    if (field.valid[f] && !assigned[f]) {
      assigned[f] = 1;
      z[f] = 1.0;
      fill();
    }
  }

  FieldSolveReport rep;
  if (options.record_energy) rep.energy.push_back(energy_of(links, z, field.valid));
  bool any_free = false;
  for (int f = 0; f < nf; ++f) any_free |= field.valid[f] && !fixed[f] && !links[f].empty();
  rep.converged = !any_free;

  for (int s = 0; any_free && s < options.max_sweeps; ++s) {
    double max_change = 0.0;
    for (int f = 0; f < nf; ++f) {
      next[f] = z[f];
      if (!field.valid[f] || fixed[f] || links[f].empty()) continue;
      std::complex<double> sum = static_cast<double>(links[f].size()) * z[f];
      for (const auto& l : links[f]) sum += l.rot * z[l.other];
      const double mag = std::abs(sum);
      if (mag < 1e-300) continue;
      next[f] = sum / mag;
      max_change = std::max(max_change, std::abs(std::arg(next[f] / z[f])) / 4.0);
    }
    z.swap(next);
    rep.sweeps = s + 1;
    rep.max_change = max_change;
    if (options.record_energy) rep.energy.push_back(energy_of(links, z, field.valid));
    if (max_change < options.tol) {
      rep.converged = true;
      break;
    }
  }

  for (int f = 0; f < nf; ++f) {
    if (!field.valid[f]) continue;
    field.theta[f] = fixed[f] ? canonical_angle(*constraints[f]) : canonical_angle(std::arg(z[f]) / 4.0);
  }
  if (report) *report = std::move(rep);
  return field;
}

FieldConstraints align_to_structure(const TriMesh& mesh, std::span<const int> structure_edges) {
  const auto frames = face_frames(mesh);
  FieldConstraints out(mesh.num_faces());
  std::vector<int> best(mesh.num_faces(), -1);
  for (int e : structure_edges) {
    if (e < 0 || e >= mesh.num_edges()) {
      throw std::out_of_range("align_to_structure: edge index out of range");
    }
    const double len = mesh.edge_length(e);
    for (int f : mesh.edge_faces[e]) {
      if (!frames[f].valid) continue;
      const int b = best[f];
      if (b >= 0) {
        const double bl = mesh.edge_length(b);
        if (len < bl || (len == bl && e > b)) continue;
      }
      best[f] = e;
    }
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (best[f] < 0) continue;
    const Vec3 d = mesh.edge_vector(best[f]).normalized();
    out[f] = canonical_angle(edge_angle_in_frame(d, frames[f]));
  }
  return out;
}

SingularityReport singularity_index(const TriMesh& mesh, const CrossField& field) {
  const int nv = mesh.num_vertices();
  const auto frames = face_frames(mesh);
  std::vector<std::vector<int>> vertex_faces(nv);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    for (int v : mesh.faces[f]) vertex_faces[v].push_back(f);
  }

  SingularityReport rep;
  rep.raw_index.assign(nv, std::nan(""));
  rep.index.assign(nv, std::nan(""));
  const double quarter = kHalfPi / 2.0;

  for (int v = 0; v < nv; ++v) {
    const auto& ring = vertex_faces[v];
    if (ring.empty()) continue;
    bool ok = true;
    for (int f : ring) ok &= static_cast<bool>(field.valid[f]);

    // Edges of face f incident to v, in corner order (v,b) then (v,c).
    auto corner = [&](int f) {
      const auto& t = mesh.faces[f];
      int k = 0;
      while (t[k] != v) ++k;
      return k;
    };
    auto edges_at = [&](int f) {
      const int k = corner(f);
      return std::array<int, 2>{mesh.face_edges[f][k], mesh.face_edges[f][(k + 2) % 3]};
    };

    double delta_sum = 0.0, angle_sum = 0.0;
    int steps = 0;
    int f = ring.front();
    int exit = edges_at(f)[1];
    while (ok) {
      const auto& t = mesh.faces[f];
      const int k = corner(f);
      const Vec3 a = mesh.vertices[t[(k + 1) % 3]] - mesh.vertices[v];
      const Vec3 b = mesh.vertices[t[(k + 2) % 3]] - mesh.vertices[v];
      angle_sum += std::atan2(a.cross(b).norm(), a.dot(b));
      if (mesh.edge_faces[exit].size() != 2) {
        ok = false;
        break;
      }
      const int g = mesh.edge_faces[exit][0] == f ? mesh.edge_faces[exit][1] : mesh.edge_faces[exit][0];
      const double r = transport_across(mesh, frames, exit, f, g);
      double d = field.theta[g] - field.theta[f] - r;
      d -= kHalfPi * std::floor((d + quarter) / kHalfPi);
      delta_sum += d;
      ++steps;
      const auto ge = edges_at(g);
      exit = ge[0] == exit ? ge[1] : ge[0];
      f = g;
      if (f == ring.front()) break;
      if (steps > static_cast<int>(ring.size())) {
        ok = false;
        break;
      }
    }
    if (!ok || steps != static_cast<int>(ring.size())) {
      rep.skipped.push_back(v);
      continue;
    }
    const double defect = 2.0 * kPi - angle_sum;
    const double raw = (delta_sum + defect) / (2.0 * kPi);
    rep.raw_index[v] = raw;
    rep.index[v] = std::round(raw * 4.0) / 4.0;
    rep.raw_sum += raw;
    if (rep.index[v] != 0.0) rep.singular.push_back(v);
  }
  return rep;
}

void save_field(const std::filesystem::path& path, const CrossField& field) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write field file: " + path.string());
  out.precision(17);
  out << "# lq-field 1 frame=e1-first-edge faces=" << field.size() << '\n';
  for (int f = 0; f < field.size(); ++f) {
    out << f << ' ';
    if (field.valid[f]) out << field.theta[f];
    else out << "nan";
    out << '\n';
  }
}

CrossField load_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open field file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# lq-field 1 ", 0) != 0) {
    throw std::runtime_error("unsupported field file header: " + path.string());
  }
  const auto pos = line.find("faces=");
  if (pos == std::string::npos) throw std::runtime_error("field file header lacks face count");
  const int n = std::stoi(line.substr(pos + 6));
  CrossField field;
  field.theta.assign(n, 0.0);
  field.valid.assign(n, 0);
  std::vector<char> seen(n, 0);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int f;
    std::string value;
    if (!(ls >> f >> value) || f < 0 || f >= n || seen[f]) {
      throw std::runtime_error("malformed field line: " + line);
    }
    seen[f] = 1;
    if (value == "nan") continue;
    field.theta[f] = std::stod(value);
    field.valid[f] = 1;
  }
  for (int f = 0; f < n; ++f) {
    if (!seen[f]) throw std::runtime_error("field file missing face " + std::to_string(f));
  }
  return field;
}

std::string dump_polyvectors(const CrossField& field) {
  std::ostringstream out;
  out.precision(17);
  for (int f = 0; f < field.size(); ++f) {
    if (!field.valid[f]) continue;
    const auto pv = encode_polyvector(field.theta[f]);
    out << f << ' ' << pv.c0.real() << ' ' << pv.c0.imag() << ' ' << pv.c1.real() << ' '
        << pv.c1.imag() << '\n';
  }
  return out.str();
}

}  // namespace lq
