#include "lq/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "lq/log.hpp"
#include "lq/rng.hpp"

namespace lq {

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

std::string fmt_real(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_real(const std::string& s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("metrics csv: bad number '" + s + "'");
  }
  return x;
}

int parse_int(const std::string& s) {
  int x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("metrics csv: bad integer '" + s + "'");
  }
  return x;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r' && c != '\n') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

SingularityCount count_singularities_detailed(const QuadMesh& qm) {
  std::map<EdgeKey, int> edge_quads;
  for (const auto& q : qm.quads) {
    for (int k = 0; k < 4; ++k) ++edge_quads[edge_key(q[k], q[(k + 1) % 4])];
  }
  const int nv = static_cast<int>(qm.vertices.size());
  std::vector<int> valence(nv, 0);
  std::vector<char> boundary(nv, 0), nonmanifold(nv, 0);
  for (const auto& [key, count] : edge_quads) {
    for (int v : {key.first, key.second}) {
      ++valence[v];
      if (count == 1) boundary[v] = 1;
      if (count > 2) nonmanifold[v] = 1;
    }
  }
  SingularityCount out;
  for (int v = 0; v < nv; ++v) {
    if (valence[v] == 0) continue;
    if (nonmanifold[v]) {
      ++out.nonmanifold_vertices;
    } else if (boundary[v]) {
      if (valence[v] != 3 && valence[v] != 2) ++out.irregular;
    } else if (valence[v] != 4) {
      ++out.irregular;
    }
  }
  return out;
}

int count_singularities(const QuadMesh& qm) { return count_singularities_detailed(qm).irregular; }

TriangleSoup triangles_of(const TriMesh& mesh) {
  TriangleSoup out;
  out.reserve(mesh.faces.size());
  for (const auto& f : mesh.faces) {
    out.push_back({mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]});
  }
  return out;
}

TriangleSoup triangles_of(const QuadMesh& qm) {
  TriangleSoup out;
  out.reserve(2 * qm.quads.size());
  for (const auto& q : qm.quads) {
    const auto& v = qm.vertices;
    out.push_back({v[q[0]], v[q[1]], v[q[2]]});
    out.push_back({v[q[0]], v[q[2]], v[q[3]]});
  }
  return out;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk over vertices, edges and the face interior.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = va + vb + vc;
  if (!(std::abs(denom) > 0.0)) {
    // Degenerate triangle: nearest of the three edges.
    Vec3 best = a;
    double bd = (p - a).squaredNorm();
    for (const auto& [s, t] : {std::pair{a, b}, std::pair{b, c}, std::pair{c, a}}) {
      const Vec3 st = t - s;
      const double l2 = st.squaredNorm();
      const double u = l2 > 0.0 ? std::clamp((p - s).dot(st) / l2, 0.0, 1.0) : 0.0;
      const Vec3 q = s + u * st;
      if ((p - q).squaredNorm() < bd) {
        bd = (p - q).squaredNorm();
        best = q;
      }
    }
    return best;
  }
  const double v = vb / denom, w = vc / denom;
  return a + v * ab + w * ac;
}

TriangleBvh::TriangleBvh(TriangleSoup triangles) : tris_(std::move(triangles)) {
  if (tris_.empty()) throw std::invalid_argument("TriangleBvh: no triangles");
  nodes_.reserve(2 * tris_.size());
  build(0, static_cast<int>(tris_.size()));
}

int TriangleBvh::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box, centers;
  for (int i = begin; i < end; ++i) {
    for (const auto& v : tris_[i]) box.extend(v);
    centers.extend((tris_[i][0] + tris_[i][1] + tris_[i][2]) / 3.0);
  }
  nodes_[id].box = box;
  if (end - begin <= 4) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis = 0;
  centers.sizes().maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(tris_.begin() + begin, tris_.begin() + mid, tris_.begin() + end,
                   [axis](const auto& s, const auto& t) {
                     return s[0][axis] + s[1][axis] + s[2][axis] <
                            t[0][axis] + t[1][axis] + t[2][axis];
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double TriangleBvh::squared_distance(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> stack = {0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (n.box.squaredExteriorDistance(p) >= best) continue;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const auto& t = tris_[i];
        best = std::min(best, (p - closest_point_on_triangle(p, t[0], t[1], t[2])).squaredNorm());
      }
      continue;
    }
    // Visit the nearer child first.
    const double dl = nodes_[n.left].box.squaredExteriorDistance(p);
    const double dr = nodes_[n.right].box.squaredExteriorDistance(p);
    if (dl < dr) {
      stack.push_back(n.right);
      stack.push_back(n.left);
    } else {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  return best;
}

std::vector<Vec3> sample_surface(const TriangleSoup& tris, int count, uint64_t seed) {
  std::vector<double> cdf(tris.size());
  double total = 0.0;
  for (size_t i = 0; i < tris.size(); ++i) {
    total += 0.5 * (tris[i][1] - tris[i][0]).cross(tris[i][2] - tris[i][0]).norm();
    cdf[i] = total;
  }
  std::vector<Vec3> out;
  if (tris.empty() || count <= 0 || !(total > 0.0)) return out;
  out.reserve(count);
  Rng rng(seed);
  for (int s = 0; s < count; ++s) {
    const double r = rng.uniform() * total;
    const size_t i = std::min<size_t>(
        std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin(), tris.size() - 1);
    double u = rng.uniform(), v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const auto& t = tris[i];
    out.push_back(t[0] + u * (t[1] - t[0]) + v * (t[2] - t[0]));
  }
  return out;
}

double chamfer(const TriangleSoup& a, const TriangleSoup& b, int samples, uint64_t seed) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty mesh");
  Eigen::AlignedBox3d box;
  for (const auto& t : a) {
    for (const auto& v : t) box.extend(v);
  }
  const double diag = box.diagonal().norm();
  const double scale = diag > 0.0 ? 1.0 / diag : 1.0;
  const Vec3 origin = box.min();
  auto normalized = [&](const TriangleSoup& s) {
    TriangleSoup out = s;
    for (auto& t : out) {
      for (auto& v : t) v = (v - origin) * scale;
    }
    return out;
  };
  const TriangleSoup na = normalized(a), nb = normalized(b);
  const TriangleBvh bvh_a(na), bvh_b(nb);
  auto one_side = [&](const TriangleSoup& from, const TriangleBvh& to, uint64_t stream) {
    const auto pts = sample_surface(from, samples, derive_seed(seed, stream));
    if (pts.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& p : pts) sum += to.squared_distance(p);
    return sum / static_cast<double>(pts.size());
  };
  return 0.5 * (one_side(na, bvh_b, 0) + one_side(nb, bvh_a, 1));
}

std::vector<double> quad_min_jacobians(const QuadMesh& qm) {
  std::vector<double> out(qm.quads.size(), 0.0);
  int degenerate = 0;
  for (size_t qi = 0; qi < qm.quads.size(); ++qi) {
    std::array<Vec3, 4> p;
    for (int k = 0; k < 4; ++k) p[k] = qm.vertices[qm.quads[qi][k]];
    Vec3 n = Vec3::Zero();
    for (int k = 0; k < 4; ++k) n += p[k].cross(p[(k + 1) % 4]);
    const double nn = n.norm();
    bool bad = !(nn > 1e-14);
    double score = 1.0;
    if (!bad) {
      n /= nn;
      for (int k = 0; k < 4 && !bad; ++k) {
        Vec3 e1 = p[(k + 1) % 4] - p[k];
        Vec3 e2 = p[(k + 3) % 4] - p[k];
        e1 -= e1.dot(n) * n;
        e2 -= e2.dot(n) * n;
        const double l = e1.norm() * e2.norm();
        if (!(l > 1e-14)) {
          bad = true;
          break;
        }
        score = std::min(score, e1.cross(e2).dot(n) / l);
      }
    }
    if (bad) {
      ++degenerate;
      out[qi] = 0.0;
    } else {
      out[qi] = std::clamp(score, 0.0, 1.0);
    }
  }
  if (degenerate > 0) {
    log_warn("scaled_jacobian: " + std::to_string(degenerate) + " degenerate quads scored 0");
  }
  return out;
}

double scaled_jacobian(const QuadMesh& qm) {
  if (qm.quads.empty()) return 0.0;
  const auto scores = quad_min_jacobians(qm);
  double sum = 0.0;
  for (double s : scores) sum += 1.0 - s;
  return sum / static_cast<double>(scores.size());
}

double MetricsReport::total_runtime() const {
  double t = 0.0;
  for (const auto& s : runtime) t += s.seconds;
  return t;
}

MetricsReport make_report(const QuadMesh& qm, const TriMesh& input,
                          std::vector<StageTime> timings, const MetricsOptions& options) {
  MetricsReport r;
  r.v_count = static_cast<int>(qm.vertices.size());
  r.f_count = static_cast<int>(qm.quads.size());
  const auto sing = count_singularities_detailed(qm);
  r.singularities = sing.irregular;
  r.nonmanifold_vertices = sing.nonmanifold_vertices;
  r.chamfer = qm.quads.empty() ? 0.0
                               : chamfer(triangles_of(input), triangles_of(qm), options.samples,
                                         options.seed);
  r.quad_min_jacobian = quad_min_jacobians(qm);
  r.sj = scaled_jacobian(qm);
  r.corrupt = corruption_check(qm).corrupt;
  r.runtime = std::move(timings);
  return r;
}

std::string metrics_csv_header(const MetricsReport& report) {
  std::string h = "V,F,I,CD,SJ,Corruption,Runtime";
  for (const auto& s : report.runtime) h += ",t_" + s.stage;
  return h;
}

std::string metrics_csv_row(const MetricsReport& report) {
  std::string r = std::to_string(report.v_count) + ',' + std::to_string(report.f_count) + ',' +
                  std::to_string(report.singularities) + ',' + fmt_real(report.chamfer) + ',' +
                  fmt_real(report.sj) + ',' + (report.corrupt ? "true" : "false") + ',' +
                  fmt_real(report.total_runtime());
  for (const auto& s : report.runtime) r += ',' + fmt_real(s.seconds);
  return r;
}

MetricsReport parse_metrics_csv(const std::string& header, const std::string& row) {
  const auto h = split_csv(header), v = split_csv(row);
  static const std::array<const char*, 7> fixed = {"V", "F", "I", "CD", "SJ", "Corruption",
                                                   "Runtime"};
  if (h.size() < fixed.size() || h.size() != v.size()) {
    throw std::invalid_argument("metrics csv: header and row do not match");
  }
  for (size_t i = 0; i < fixed.size(); ++i) {
    if (h[i] != fixed[i]) throw std::invalid_argument("metrics csv: unexpected column " + h[i]);
  }
  MetricsReport r;
  r.v_count = parse_int(v[0]);
  r.f_count = parse_int(v[1]);
  r.singularities = parse_int(v[2]);
  r.chamfer = parse_real(v[3]);
  r.sj = parse_real(v[4]);
  if (v[5] != "true" && v[5] != "false") {
    throw std::invalid_argument("metrics csv: Corruption must be true or false");
  }
  r.corrupt = v[5] == "true";
  for (size_t i = fixed.size(); i < h.size(); ++i) {
    if (h[i].rfind("t_", 0) != 0) throw std::invalid_argument("metrics csv: bad stage " + h[i]);
    r.runtime.push_back({h[i].substr(2), parse_real(v[i])});
  }
  return r;
}

std::string format_metrics_table(const MetricsReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "V" << report.v_count << '\n'
      << std::setw(12) << "F" << report.f_count << '\n'
      << std::setw(12) << "I" << report.singularities << '\n'
      << std::setw(12) << "CD(1e-5)" << std::setprecision(6) << report.chamfer * 1e5 << '\n'
      << std::setw(12) << "SJ" << report.sj << '\n'
      << std::setw(12) << "Corruption" << (report.corrupt ? "true" : "false") << '\n'
      << std::setw(12) << "Runtime(s)" << report.total_runtime() << '\n';
  for (const auto& s : report.runtime) {
    out << "  " << std::setw(10) << s.stage << s.seconds << '\n';
  }
  return out.str();
}

}  // namespace lq
