#include "lq/remeshing.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "lq/log.hpp"

namespace lq {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Boundary turns below this are not sharp enough to count as corners.
constexpr double kCornerTurn = kPi / 6.0;

int other_end(const TriMesh& mesh, int e, int v) {
  return mesh.edges[e][0] == v ? mesh.edges[e][1] : mesh.edges[e][0];
}

std::vector<std::vector<int>> masked_incidence(const TriMesh& mesh, const std::vector<char>& mask) {
  std::vector<std::vector<int>> inc(mesh.num_vertices());
  for (int e = 0; e < mesh.num_edges(); ++e) {
    if (!mask[e]) continue;
    inc[mesh.edges[e][0]].push_back(e);
    inc[mesh.edges[e][1]].push_back(e);
  }
  return inc;
}

// Maximal chains of masked edges. Chains stop at vertices whose masked degree
// is not 2 or that are flagged in `stop`. Node-free loops start at their
// smallest vertex and walk towards the larger end of its first edge.
std::vector<Polyline> chain_edges(const TriMesh& mesh, const std::vector<char>& mask,
                                  const std::vector<char>& stop) {
  const auto inc = masked_incidence(mesh, mask);
  auto is_node = [&](int v) {
    return inc[v].size() != 2 || (!stop.empty() && stop[v]);
  };
  std::vector<char> used(mesh.num_edges(), 0);
  std::vector<Polyline> out;
  auto walk = [&](int start, int first_edge) {
    Polyline pl;
    pl.vertices.push_back(start);
    int e = first_edge;
    int v = start;
    while (true) {
      used[e] = 1;
      pl.edges.push_back(e);
      v = other_end(mesh, e, v);
      pl.vertices.push_back(v);
      if (is_node(v)) break;
      const int next = inc[v][0] == e ? inc[v][1] : inc[v][0];
      if (used[next]) break;
      e = next;
    }
    pl.closed = pl.vertices.front() == pl.vertices.back() && !is_node(start);
    out.push_back(std::move(pl));
  };
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (inc[v].empty() || !is_node(v)) continue;
    for (int e : inc[v]) {
      if (!used[e]) walk(v, e);
    }
  }
  for (int e = 0; e < mesh.num_edges(); ++e) {
    if (mask[e] && !used[e]) walk(mesh.edges[e][0], e);
  }
  return out;
}

std::vector<char> boundary_vertices(const TriMesh& mesh) {
  std::vector<char> out(mesh.num_vertices(), 0);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    if (mesh.is_boundary_edge(e)) out[mesh.edges[e][0]] = out[mesh.edges[e][1]] = 1;
  }
  return out;
}

double corner_angle(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 u = a - p, w = b - p;
  return std::atan2(u.cross(w).norm(), u.dot(w));
}

}  // namespace

// --- Structure lines -----------------------------------------------------------

StructLineGraph chain_lines(const TriMesh& mesh, std::vector<char> structural) {
  if (static_cast<int>(structural.size()) != mesh.num_edges()) {
    throw std::invalid_argument("chain_lines: mask size does not match edge count");
  }
  StructLineGraph g;
  g.structural = std::move(structural);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    if (g.structural[e]) g.structural_edges.push_back(e);
  }
  g.polylines = chain_edges(mesh, g.structural, {});
  const auto inc = masked_incidence(mesh, g.structural);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (!inc[v].empty() && inc[v].size() != 2) g.junctions.push_back(v);
  }
  return g;
}

StructLineGraph extract_lines(const TriMesh& mesh, std::span<const double> probs,
                              const LineOptions& options) {
  if (static_cast<int>(probs.size()) != mesh.num_edges()) {
    throw std::invalid_argument("extract_lines: probability count does not match edge count");
  }
  std::vector<char> mask(mesh.num_edges(), 0);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    if (!(probs[e] >= 0.0 && probs[e] <= 1.0)) {
      throw std::invalid_argument("extract_lines: probabilities must lie in [0, 1]");
    }
    mask[e] = probs[e] >= options.threshold;
  }
  const auto inc = masked_incidence(mesh, mask);
  const auto on_boundary = boundary_vertices(mesh);
  auto anchored = [&](int v) { return inc[v].size() >= 3 || on_boundary[v]; };
  int pruned = 0;
  for (const auto& pl : chain_edges(mesh, mask, {})) {
    if (pl.closed || static_cast<int>(pl.edges.size()) >= options.min_chain) continue;
    if (anchored(pl.vertices.front()) || anchored(pl.vertices.back())) continue;
    for (int e : pl.edges) mask[e] = 0;
    pruned += static_cast<int>(pl.edges.size());
  }
  StructLineGraph g = chain_lines(mesh, std::move(mask));
  g.pruned_edges = pruned;
  return g;
}

// --- Partition -----------------------------------------------------------------

std::vector<int> disk_boundary(const TriMesh& mesh, std::span<const int> faces) {
  std::vector<int> edges, verts;
  edges.reserve(faces.size() * 3);
  verts.reserve(faces.size() * 3);
  for (int f : faces) {
    for (int k = 0; k < 3; ++k) {
      edges.push_back(mesh.face_edges[f][k]);
      verts.push_back(mesh.faces[f][k]);
    }
  }
  std::sort(edges.begin(), edges.end());
  std::sort(verts.begin(), verts.end());
  const auto nv = std::unique(verts.begin(), verts.end()) - verts.begin();
  auto count = [&](int e) {
    const auto r = std::equal_range(edges.begin(), edges.end(), e);
    return static_cast<int>(r.second - r.first);
  };
  int ne = 0;
  for (size_t i = 0; i < edges.size(); ++i) {
    if (i > 0 && edges[i] == edges[i - 1]) continue;
    ++ne;
    if (count(edges[i]) >= 3) return {};
  }
  if (nv - ne + static_cast<int>(faces.size()) != 1) return {};

  std::map<int, int> next;
  for (int f : faces) {
    for (int k = 0; k < 3; ++k) {
      if (count(mesh.face_edges[f][k]) != 1) continue;
      const int a = mesh.faces[f][k], b = mesh.faces[f][(k + 1) % 3];
      if (!next.emplace(a, b).second) return {};
    }
  }
  if (next.empty()) return {};
  std::vector<int> loop;
  int v = next.begin()->first;
  do {
    loop.push_back(v);
    const auto it = next.find(v);
    if (it == next.end() || loop.size() > next.size()) return {};
    v = it->second;
  } while (v != loop.front());
  if (loop.size() != next.size()) return {};
  return loop;
}

namespace {

struct Splitter {
  const TriMesh& mesh;
  int max_depth;
  std::vector<int> local;  // face -> index in current region, -1 otherwise
  std::vector<Vec3> centroid;
  std::vector<Patch> out;

  Splitter(const TriMesh& m, int depth) : mesh(m), max_depth(depth), local(m.num_faces(), -1) {
    centroid.resize(m.num_faces());
    for (int f = 0; f < m.num_faces(); ++f) centroid[f] = m.face_centroid(f);
  }

  // Multi-source Dijkstra on the region's dual graph; returns (distance, owner).
  std::pair<std::vector<double>, std::vector<int>> grow(const std::vector<int>& faces,
                                                        const std::vector<int>& seeds) {
    std::vector<double> dist(faces.size(), kInf);
    std::vector<int> owner(faces.size(), -1);
    using Item = std::tuple<double, int, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (size_t s = 0; s < seeds.size(); ++s) {
      dist[local[seeds[s]]] = 0.0;
      owner[local[seeds[s]]] = static_cast<int>(s);
      heap.emplace(0.0, static_cast<int>(s), seeds[s]);
    }
    while (!heap.empty()) {
      const auto [d, o, f] = heap.top();
      heap.pop();
      const int lf = local[f];
      if (d > dist[lf] || o != owner[lf]) continue;
      for (int e : mesh.face_edges[f]) {
        if (mesh.edge_faces[e].size() != 2) continue;
        const int g = mesh.edge_faces[e][0] == f ? mesh.edge_faces[e][1] : mesh.edge_faces[e][0];
        const int lg = local[g];
        if (lg < 0) continue;
        const double nd = d + (centroid[f] - centroid[g]).norm();
        if (nd < dist[lg] || (nd == dist[lg] && o < owner[lg])) {
          dist[lg] = nd;
          owner[lg] = o;
          heap.emplace(nd, o, g);
        }
      }
    }
    return {dist, owner};
  }

  int farthest(const std::vector<int>& faces, const std::vector<double>& dist) {
    int best = faces.front();
    double best_d = -1.0;
    for (size_t i = 0; i < faces.size(); ++i) {
      if (dist[i] < kInf && dist[i] > best_d) {
        best_d = dist[i];
        best = faces[i];
      }
    }
    return best;
  }

  void split(std::vector<int> faces, int depth) {
    std::vector<int> loop = disk_boundary(mesh, faces);
    if (!loop.empty()) {
      Patch p;
      p.faces = std::move(faces);
      p.boundary = std::move(loop);
      p.disk = true;
      out.push_back(std::move(p));
      return;
    }
    auto give_up = [&](const std::string& why) {
      Patch p;
      p.faces = std::move(faces);
      p.unmeshable = true;
      p.issue = why;
      out.push_back(std::move(p));
    };
    if (depth >= max_depth) return give_up("not a disk after " + std::to_string(depth) + " splits");
    for (size_t i = 0; i < faces.size(); ++i) local[faces[i]] = static_cast<int>(i);
    const int s1 = farthest(faces, grow(faces, {faces.front()}).first);
    const int s2 = farthest(faces, grow(faces, {s1}).first);
    const auto owner = grow(faces, {s1, s2}).second;
    for (int f : faces) local[f] = -1;
    if (s1 == s2) return give_up("single-face region is not a disk");
    std::vector<int> half[2];
    for (size_t i = 0; i < faces.size(); ++i) half[owner[i] == 1].push_back(faces[i]);
    if (half[0].empty() || half[1].empty()) return give_up("region could not be bisected");
    split(std::move(half[0]), depth + 1);
    split(std::move(half[1]), depth + 1);
  }
};

}  // namespace

Layout partition(const TriMesh& mesh, const StructLineGraph& lines, const PartitionOptions& options) {
  if (static_cast<int>(lines.structural.size()) != mesh.num_edges()) {
    throw std::invalid_argument("partition: line graph does not match the mesh");
  }
  const int nf = mesh.num_faces();
  std::vector<int> region(nf, -1);
  Splitter splitter(mesh, options.max_split_depth);
  for (int seed = 0; seed < nf; ++seed) {
    if (region[seed] >= 0) continue;
    std::vector<int> faces = {seed};
    region[seed] = seed;
    for (size_t i = 0; i < faces.size(); ++i) {
      const int f = faces[i];
      for (int e : mesh.face_edges[f]) {
        if (lines.structural[e] || mesh.edge_faces[e].size() != 2) continue;
        for (int g : mesh.edge_faces[e]) {
          if (region[g] < 0) {
            region[g] = seed;
            faces.push_back(g);
          }
        }
      }
    }
    std::sort(faces.begin(), faces.end());
    splitter.split(std::move(faces), 0);
  }

  Layout layout;
  layout.patches = std::move(splitter.out);
  std::sort(layout.patches.begin(), layout.patches.end(),
            [](const Patch& a, const Patch& b) { return a.faces.front() < b.faces.front(); });
  layout.face_patch.assign(nf, -1);
  for (size_t p = 0; p < layout.patches.size(); ++p) {
    for (int f : layout.patches[p].faces) layout.face_patch[f] = static_cast<int>(p);
  }
  layout.cut.assign(mesh.num_edges(), 0);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const auto& ef = mesh.edge_faces[e];
    const bool cut = ef.size() != 2 || layout.face_patch[ef[0]] != layout.face_patch[ef[1]];
    layout.cut[e] = cut;
    if (cut && ef.size() == 2 && !lines.structural[e]) ++layout.added_cut_edges;
    if (!cut && lines.structural[e]) ++layout.demoted_edges;
  }
  return layout;
}

std::vector<char> layout_junctions(const TriMesh& mesh, const Layout& layout) {
  std::vector<int> degree(mesh.num_vertices(), 0);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    if (!layout.cut[e]) continue;
    ++degree[mesh.edges[e][0]];
    ++degree[mesh.edges[e][1]];
  }
  std::vector<char> out(mesh.num_vertices(), 0);
  for (int v = 0; v < mesh.num_vertices(); ++v) out[v] = degree[v] >= 3;
  return out;
}

// --- Parametrization -------------------------------------------------------------

namespace {

void flag(Patch& p, const std::string& why) {
  p.unmeshable = true;
  p.issue = why;
}

std::array<int, 4> choose_corners(const std::vector<int>& loop, const std::vector<double>& turning,
                                  const std::vector<double>& arc, double perimeter,
                                  std::span<const char> is_junction) {
  const int n = static_cast<int>(loop.size());
  std::vector<int> chosen;
  for (int i = 0; i < n; ++i) {
    if (is_junction[loop[i]]) chosen.push_back(i);
  }
  auto sharper = [&](int a, int b) { return turning[a] > turning[b] || (turning[a] == turning[b] && a < b); };
  if (chosen.size() > 4) {
    std::sort(chosen.begin(), chosen.end(), sharper);
    chosen.resize(4);
  }
  while (chosen.size() < 4) {
    std::vector<char> taken(n, 0);
    for (int c : chosen) taken[c] = 1;
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if ((chosen.empty() || turning[i] >= kCornerTurn) && (best < 0 || sharper(i, best))) best = i;
    }
    if (best < 0 || (!chosen.empty() && turning[best] < kCornerTurn)) {
      // Smooth boundary: farthest loop position (by arc length) from the chosen ones.
      best = -1;
      double best_gap = -1.0;
      for (int i = 0; i < n; ++i) {
        if (taken[i]) continue;
        double gap = kInf;
        for (int c : chosen) {
          const double d = std::abs(arc[i] - arc[c]);
          gap = std::min(gap, std::min(d, perimeter - d));
        }
        if (gap > best_gap + 1e-12) {
          best_gap = gap;
          best = i;
        }
      }
    }
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());
  return {chosen[0], chosen[1], chosen[2], chosen[3]};
}

}  // namespace

void parametrize_patch(const TriMesh& mesh, std::span<const FaceFrame> frames, Patch& patch,
                       const CrossField& field, std::span<const char> is_junction) {
  patch.has_param = false;
  if (!patch.disk || patch.boundary.empty()) return flag(patch, "not a disk");
  const auto& loop = patch.boundary;
  const int nb = static_cast<int>(loop.size());
  if (nb < 4) return flag(patch, "boundary has fewer than 4 vertices");

  patch.vertices.clear();
  for (int f : patch.faces) {
    for (int v : mesh.faces[f]) patch.vertices.push_back(v);
  }
  std::sort(patch.vertices.begin(), patch.vertices.end());
  patch.vertices.erase(std::unique(patch.vertices.begin(), patch.vertices.end()), patch.vertices.end());
  const int nv = static_cast<int>(patch.vertices.size());
  auto local = [&](int v) {
    return static_cast<int>(std::lower_bound(patch.vertices.begin(), patch.vertices.end(), v) -
                            patch.vertices.begin());
  };
  std::vector<int> loop_pos(nv, -1);
  for (int i = 0; i < nb; ++i) loop_pos[local(loop[i])] = i;

  // Boundary turning angles and arc lengths.
  std::vector<double> angle_sum(nb, 0.0);
  for (int f : patch.faces) {
    for (int k = 0; k < 3; ++k) {
      const int pos = loop_pos[local(mesh.faces[f][k])];
      if (pos < 0) continue;
      angle_sum[pos] += corner_angle(mesh.vertices[mesh.faces[f][k]],
                                     mesh.vertices[mesh.faces[f][(k + 1) % 3]],
                                     mesh.vertices[mesh.faces[f][(k + 2) % 3]]);
    }
  }
  std::vector<double> turning(nb), arc(nb + 1, 0.0);
  for (int i = 0; i < nb; ++i) {
    turning[i] = kPi - angle_sum[i];
    arc[i + 1] = arc[i] + (mesh.vertices[loop[(i + 1) % nb]] - mesh.vertices[loop[i]]).norm();
  }
  const double perimeter = arc[nb];
  auto corners = choose_corners(loop, turning, arc, perimeter, is_junction);

  // Patch orientation: area-weighted circular mean of the field in the
  // reference face frame.
  const int ref = patch.faces.front();
  std::vector<double> acc(mesh.num_faces(), kInf);
  std::vector<int> queue = {ref};
  acc[ref] = 0.0;
  std::complex<double> sum(0.0, 0.0);
  for (size_t i = 0; i < queue.size(); ++i) {
    const int f = queue[i];
    if (f < field.size() && field.valid[f]) {
      sum += mesh.face_areas[f] * std::polar(1.0, 4.0 * (field.theta[f] - acc[f]));
    }
    for (int e : mesh.face_edges[f]) {
      if (mesh.edge_faces[e].size() != 2) continue;
      const int g = mesh.edge_faces[e][0] == f ? mesh.edge_faces[e][1] : mesh.edge_faces[e][0];
      if (acc[g] < kInf || !std::binary_search(patch.faces.begin(), patch.faces.end(), g)) continue;
      acc[g] = acc[f] + transport_angle(mesh, frames, f, g);
      queue.push_back(g);
    }
  }
  patch.orientation = std::abs(sum) > 1e-12 ? canonical_angle(std::arg(sum) / 4.0) : 0.0;
  const FaceFrame& fr = frames[ref];
  // A cross cannot tell u from v: the u side follows the arm nearest the
  // reference frame's first axis.
  const double arm = patch.orientation > kPi / 4.0 + 1e-9 ? patch.orientation - kPi / 2.0
                                                          : patch.orientation;
  const Vec3 dir = std::cos(arm) * fr.e1 + std::sin(arm) * fr.e2;
  std::array<Vec3, 4> chord;
  std::array<double, 4> along{};
  for (int k = 0; k < 4; ++k) {
    Vec3 c = mesh.vertices[loop[corners[(k + 1) % 4]]] - mesh.vertices[loop[corners[k]]];
    c -= c.dot(fr.n) * fr.n;
    const double len = c.norm();
    chord[k] = len > 1e-15 ? Vec3(c / len) : Vec3::Zero();
    along[k] = chord[k].dot(dir);
  }
  const int base = std::abs(along[0]) + std::abs(along[2]) >= std::abs(along[1]) + std::abs(along[3]) - 1e-12 ? 0 : 1;
  const int rot = along[base] >= along[base + 2] ? base : base + 2;
  std::rotate(corners.begin(), corners.begin() + rot, corners.end());
  patch.corners = corners;
  patch.corner_count = 4;

  // Rectangle boundary by arc length.
  auto side_arc = [&](int k) {
    const double a = arc[corners[k]], b = arc[corners[(k + 1) % 4]];
    return b >= a ? b - a : perimeter - a + b;
  };
  std::array<double, 4> side_len{};
  for (int k = 0; k < 4; ++k) side_len[k] = side_arc(k);
  const double U = 0.5 * (side_len[0] + side_len[2]);
  const double V = 0.5 * (side_len[1] + side_len[3]);
  if (!(U > 0.0) || !(V > 0.0)) return flag(patch, "degenerate rectangle");
  patch.extent = Vec2(U, V);
  patch.param.assign(nv, Vec2::Zero());
  for (int k = 0; k < 4; ++k) {
    int i = corners[k];
    double s = 0.0;
    const int end = corners[(k + 1) % 4];
    do {
      const double t = s / side_len[k];
      Vec2 q;
      switch (k) {
        case 0: q = Vec2(U * t, 0.0); break;
        case 1: q = Vec2(U, V * t); break;
        case 2: q = Vec2(U * (1.0 - t), V); break;
        default: q = Vec2(0.0, V * (1.0 - t)); break;
      }
      patch.param[local(loop[i])] = q;
      const int j = (i + 1) % nb;
      s += (mesh.vertices[loop[j]] - mesh.vertices[loop[i]]).norm();
      i = j;
    } while (i != end);
  }

  // Interior: cotangent Laplace with the boundary fixed.
  std::vector<int> unknown(nv, -1);
  int ni = 0;
  for (int i = 0; i < nv; ++i) {
    if (loop_pos[i] < 0) unknown[i] = ni++;
  }
  if (ni > 0) {
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ni, 2);
    for (int f : patch.faces) {
      if (mesh.is_degenerate_face(f)) continue;
      for (int k = 0; k < 3; ++k) {
        const int a = local(mesh.faces[f][(k + 1) % 3]), b = local(mesh.faces[f][(k + 2) % 3]);
        const Vec3 u = mesh.vertices[mesh.faces[f][(k + 1) % 3]] - mesh.vertices[mesh.faces[f][k]];
        const Vec3 w = mesh.vertices[mesh.faces[f][(k + 2) % 3]] - mesh.vertices[mesh.faces[f][k]];
        const double w_ab = 0.5 * u.dot(w) / u.cross(w).norm();
        for (const auto& [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
          if (unknown[x] < 0) continue;
          trip.emplace_back(unknown[x], unknown[x], w_ab);
          if (unknown[y] >= 0) {
            trip.emplace_back(unknown[x], unknown[y], -w_ab);
          } else {
            rhs.row(unknown[x]) += w_ab * patch.param[y].transpose();
          }
        }
      }
    }
    Eigen::SparseMatrix<double> A(ni, ni);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success) return flag(patch, "Laplace factorization failed");
    const Eigen::MatrixXd x = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !x.allFinite()) return flag(patch, "Laplace solve failed");
    for (int i = 0; i < nv; ++i) {
      if (unknown[i] >= 0) patch.param[i] = x.row(unknown[i]).transpose();
    }
  }
  patch.flipped_triangles = 0;
  for (int f : patch.faces) {
    const Vec2 a = patch.param[local(mesh.faces[f][0])];
    const Vec2 b = patch.param[local(mesh.faces[f][1])];
    const Vec2 c = patch.param[local(mesh.faces[f][2])];
    const Vec2 ab = b - a, ac = c - a;
    if (ab.x() * ac.y() - ab.y() * ac.x() <= 0.0) ++patch.flipped_triangles;
  }
  patch.has_param = true;
}

void parametrize_patch(const TriMesh& mesh, Patch& patch, const CrossField& field,
                       std::span<const char> is_junction) {
  const auto frames = face_frames(mesh);
  parametrize_patch(mesh, frames, patch, field, is_junction);
}

// --- Intervals -----------------------------------------------------------------

namespace {

bool meshable(const Patch& p) { return p.has_param && !p.unmeshable; }

}  // namespace

int side_count(const IntervalPlan& plan, int patch, int side) {
  int n = 0;
  for (const auto& r : plan.sides[patch][side]) n += plan.count[r.segment];
  return n;
}

IntervalPlan assign_intervals(const TriMesh& mesh, Layout& layout, double target_len) {
  if (!(target_len > 0.0)) throw std::invalid_argument("assign_intervals: target_len must be positive");
  IntervalPlan plan;
  const int np = static_cast<int>(layout.patches.size());
  plan.is_node = layout_junctions(mesh, layout);
  for (const auto& p : layout.patches) {
    if (!meshable(p)) continue;
    for (int c : p.corners) plan.is_node[p.boundary[c]] = 1;
  }
  std::vector<int> seg_of_edge(mesh.num_edges(), -1), pos_in_seg(mesh.num_edges(), -1);
  for (auto& pl : chain_edges(mesh, layout.cut, plan.is_node)) {
    Segment s;
    s.vertices = std::move(pl.vertices);
    s.edges = std::move(pl.edges);
    s.mesh_boundary = s.nonmanifold = true;
    for (size_t i = 0; i < s.edges.size(); ++i) {
      const int e = s.edges[i];
      seg_of_edge[e] = static_cast<int>(plan.segments.size());
      pos_in_seg[e] = static_cast<int>(i);
      s.length += mesh.edge_length(e);
      s.mesh_boundary = s.mesh_boundary && mesh.is_boundary_edge(e);
      s.nonmanifold = s.nonmanifold && mesh.is_nonmanifold_edge(e);
    }
    for (int f : mesh.edge_faces[s.edges.front()]) s.patches.push_back(layout.face_patch[f]);
    std::sort(s.patches.begin(), s.patches.end());
    s.patches.erase(std::unique(s.patches.begin(), s.patches.end()), s.patches.end());
    plan.segments.push_back(std::move(s));
  }
  plan.count.resize(plan.segments.size());
  for (size_t s = 0; s < plan.segments.size(); ++s) {
    plan.count[s] = std::max(1, static_cast<int>(std::lround(plan.segments[s].length / target_len)));
  }

  plan.sides.resize(np);
  for (int p = 0; p < np; ++p) {
    Patch& patch = layout.patches[p];
    if (!meshable(patch)) continue;
    const auto& loop = patch.boundary;
    const int nb = static_cast<int>(loop.size());
    for (int k = 0; k < 4; ++k) {
      auto& side = plan.sides[p][k];
      int i = patch.corners[k], edges = 0;
      const int end = patch.corners[(k + 1) % 4];
      do {
        const int j = (i + 1) % nb;
        const int e = mesh.find_edge(loop[i], loop[j]);
        const int s = seg_of_edge[e];
        if (s < 0) break;
        if (side.empty() || side.back().segment != s) {
          side.push_back({s, plan.segments[s].vertices[pos_in_seg[e]] == loop[i]});
          edges += static_cast<int>(plan.segments[s].edges.size());
        }
        i = j;
      } while (i != end);
      const int expected = (patch.corners[(k + 1) % 4] - patch.corners[k] + nb) % nb;
      if (edges != expected) flag(patch, "side does not decompose into layout segments");
    }
  }

  // Pull opposite sides to their rounded average.
  auto adjust = [&](const std::vector<SideRef>& side, int target) {
    int total = 0;
    for (const auto& r : side) total += plan.count[r.segment];
    while (total < target) {
      int best = side.front().segment;
      for (const auto& r : side) {
        const int s = r.segment;
        if (plan.segments[s].length / plan.count[s] > plan.segments[best].length / plan.count[best]) best = s;
      }
      ++plan.count[best];
      ++total;
    }
    while (total > target) {
      int best = -1;
      for (const auto& r : side) {
        const int s = r.segment;
        if (plan.count[s] <= 1) continue;
        if (best < 0 || plan.segments[s].length / plan.count[s] < plan.segments[best].length / plan.count[best]) best = s;
      }
      if (best < 0) break;
      --plan.count[best];
      --total;
    }
  };
  for (plan.rounds = 0; plan.rounds < 10;) {
    bool changed = false;
    for (int p = 0; p < np; ++p) {
      if (!meshable(layout.patches[p])) continue;
      for (int d = 0; d < 2; ++d) {
        const int a = side_count(plan, p, d), c = side_count(plan, p, d + 2);
        if (a == c) continue;
        const int lo = static_cast<int>(std::max(plan.sides[p][d].size(), plan.sides[p][d + 2].size()));
        const int m = std::max(lo, static_cast<int>(std::lround(0.5 * (a + c))));
        adjust(plan.sides[p][d], m);
        adjust(plan.sides[p][d + 2], m);
        changed = true;
      }
    }
    if (!changed) break;
    ++plan.rounds;
  }

  for (int p = 0; p < np; ++p) {
    Patch& patch = layout.patches[p];
    if (!meshable(patch)) continue;
    const int du = side_count(plan, p, 0) - side_count(plan, p, 2);
    const int dv = side_count(plan, p, 1) - side_count(plan, p, 3);
    if (du == 0 && dv == 0) continue;
    ++plan.residual_mismatches;
    if (du != 0 && dv != 0) {
      flag(patch, "interval mismatch on both side pairs");
    } else if ((du + dv) % 2 != 0) {
      flag(patch, "odd interval mismatch");
    } else {
      plan.t_transitions += std::abs(du + dv) / 2;
    }
  }
  return plan;
}

// --- Quad extraction -------------------------------------------------------------

namespace {

// Point location in a parametrized patch via a uniform bucket grid.
class ParamLocator {
 public:
  ParamLocator(const TriMesh& mesh, const Patch& patch) : mesh_(mesh), patch_(patch) {
    for (int f : patch.faces) {
      std::array<int, 3> t;
      for (int k = 0; k < 3; ++k) t[k] = local(mesh.faces[f][k]);
      tris_.push_back(t);
    }
    lo_ = Vec2::Constant(kInf);
    hi_ = Vec2::Constant(-kInf);
    for (const auto& q : patch.param) {
      lo_ = lo_.cwiseMin(q);
      hi_ = hi_.cwiseMax(q);
    }
    res_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(tris_.size()))));
    cells_.resize(static_cast<size_t>(res_) * res_);
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
      Vec2 tl = Vec2::Constant(kInf), th = Vec2::Constant(-kInf);
      for (int v : tris_[t]) {
        tl = tl.cwiseMin(patch.param[v]);
        th = th.cwiseMax(patch.param[v]);
      }
      const auto [x0, y0] = cell(tl);
      const auto [x1, y1] = cell(th);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) cells_[static_cast<size_t>(y) * res_ + x].push_back(t);
      }
    }
  }

  // 3D position of a parameter point; sets `snapped` when no triangle
  // contains it and the nearest one was used.
  Vec3 locate(const Vec2& q, bool& snapped) const {
    snapped = false;
    const auto [x, y] = cell(q);
    for (int t : cells_[static_cast<size_t>(y) * res_ + x]) {
      Eigen::Vector3d b;
      if (barycentric(t, q, b) && b.minCoeff() >= -1e-9) return lift(t, b);
    }
    snapped = true;
    int best = -1;
    double best_d = kInf;
    Eigen::Vector3d best_b;
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
      Eigen::Vector3d b;
      if (!barycentric(t, q, b)) continue;
      b = b.cwiseMax(0.0);
      b /= b.sum();
      const Vec2 p = b[0] * patch_.param[tris_[t][0]] + b[1] * patch_.param[tris_[t][1]] +
                     b[2] * patch_.param[tris_[t][2]];
      const double d = (p - q).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = t;
        best_b = b;
      }
    }
    if (best < 0) return mesh_.vertices[patch_.vertices.front()];
    return lift(best, best_b);
  }

 private:
  int local(int v) const {
    return static_cast<int>(std::lower_bound(patch_.vertices.begin(), patch_.vertices.end(), v) -
                            patch_.vertices.begin());
  }
  std::pair<int, int> cell(const Vec2& q) const {
    const Vec2 span = (hi_ - lo_).cwiseMax(1e-300);
    auto idx = [&](int a) {
      const int i = static_cast<int>((q[a] - lo_[a]) / span[a] * res_);
      return std::clamp(i, 0, res_ - 1);
    };
    return {idx(0), idx(1)};
  }
  bool barycentric(int t, const Vec2& q, Eigen::Vector3d& b) const {
    const Vec2& a = patch_.param[tris_[t][0]];
    const Vec2 e1 = patch_.param[tris_[t][1]] - a, e2 = patch_.param[tris_[t][2]] - a, d = q - a;
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    if (std::abs(det) < 1e-300) return false;
    b[1] = (d.x() * e2.y() - d.y() * e2.x()) / det;
    b[2] = (e1.x() * d.y() - e1.y() * d.x()) / det;
    b[0] = 1.0 - b[1] - b[2];
    return true;
  }
  Vec3 lift(int t, const Eigen::Vector3d& b) const {
    return b[0] * mesh_.vertices[patch_.vertices[tris_[t][0]]] +
           b[1] * mesh_.vertices[patch_.vertices[tris_[t][1]]] +
           b[2] * mesh_.vertices[patch_.vertices[tris_[t][2]]];
  }

  const TriMesh& mesh_;
  const Patch& patch_;
  std::vector<std::array<int, 3>> tris_;
  Vec2 lo_, hi_;
  int res_ = 1;
  std::vector<std::vector<int>> cells_;
};

// A patch-local vertex: either a boundary sample resolved through the
// registry, or an interior point located in the parametrization.
struct LocalVertex {
  int segment = -1;  // -1 with node < 0 means interior
  int index = 0;     // sample index along the segment
  int node = -1;     // mesh vertex for corner/node samples
  Vec2 param;
};

Vec2 lerp_samples(const std::vector<LocalVertex>& s, double t) {
  const int n = static_cast<int>(s.size()) - 1;
  const double x = std::clamp(t, 0.0, 1.0) * n;
  const int i = std::min(static_cast<int>(x), n - 1);
  const double f = x - i;
  return (1.0 - f) * s[i].param + f * s[i + 1].param;
}

class Registry {
 public:
  Registry(const TriMesh& mesh, const IntervalPlan& plan, QuadMesh& qm) : mesh_(mesh), plan_(plan), qm_(qm) {
    on_boundary_ = boundary_vertices(mesh);
    on_nonmanifold_.assign(mesh.num_vertices(), 0);
    for (int e = 0; e < mesh.num_edges(); ++e) {
      if (mesh.is_nonmanifold_edge(e)) on_nonmanifold_[mesh.edges[e][0]] = on_nonmanifold_[mesh.edges[e][1]] = 1;
    }
  }

  void clear() {
    nodes_.clear();
    samples_.clear();
  }

  int node(int v) {
    const auto it = nodes_.find(v);
    if (it != nodes_.end()) return it->second;
    const int id = add(mesh_.vertices[v], VertexSource::kLine, on_boundary_[v], on_nonmanifold_[v]);
    nodes_.emplace(v, id);
    return id;
  }

  int sample(int seg, int k) {
    const Segment& s = plan_.segments[seg];
    const int n = plan_.count[seg];
    if (k == 0) return node(s.vertices.front());
    if (k == n) return node(s.vertices.back());
    const auto key = std::make_pair(seg, k);
    const auto it = samples_.find(key);
    if (it != samples_.end()) return it->second;
    const int id = add(point_on(s, s.length * k / n), VertexSource::kLine, s.mesh_boundary, s.nonmanifold);
    samples_.emplace(key, id);
    return id;
  }

  int add(const Vec3& p, VertexSource src, bool boundary, bool nonmanifold) {
    qm_.vertices.push_back(p);
    qm_.provenance.push_back(src);
    qm_.on_mesh_boundary.push_back(boundary);
    qm_.on_nonmanifold.push_back(nonmanifold);
    return static_cast<int>(qm_.vertices.size()) - 1;
  }

 private:
  Vec3 point_on(const Segment& s, double target) const {
    double walked = 0.0;
    for (size_t i = 0; i + 1 < s.vertices.size(); ++i) {
      const Vec3& a = mesh_.vertices[s.vertices[i]];
      const Vec3& b = mesh_.vertices[s.vertices[i + 1]];
      const double len = (b - a).norm();
      if (walked + len >= target || i + 2 == s.vertices.size()) {
        const double t = len > 0.0 ? std::clamp((target - walked) / len, 0.0, 1.0) : 0.0;
        return a + t * (b - a);
      }
      walked += len;
    }
    return mesh_.vertices[s.vertices.back()];
  }

  const TriMesh& mesh_;
  const IntervalPlan& plan_;
  QuadMesh& qm_;
  std::vector<char> on_boundary_, on_nonmanifold_;
  std::map<int, int> nodes_;
  std::map<std::pair<int, int>, int> samples_;
};

}  // namespace

QuadMesh extract_quads(const TriMesh& mesh, Layout& layout, const IntervalPlan& plan,
                       const ExtractOptions& options, ExtractStats* stats) {
  QuadMesh qm;
  Registry registry(mesh, plan, qm);
  ExtractStats local_stats;
  const int np = static_cast<int>(layout.patches.size());
  for (int p = 0; p < np; ++p) {
    Patch& patch = layout.patches[p];
    if (!meshable(patch)) continue;
    const double U = patch.extent.x(), V = patch.extent.y();

    // Boundary samples per side, corner k to corner k+1.
    std::array<std::vector<LocalVertex>, 4> side;
    for (int k = 0; k < 4; ++k) {
      double len = 0.0;
      for (const auto& r : plan.sides[p][k]) len += plan.segments[r.segment].length;
      double offset = 0.0;
      for (const auto& r : plan.sides[p][k]) {
        const Segment& s = plan.segments[r.segment];
        const int n = plan.count[r.segment];
        for (int i = 0; i < n; ++i) {
          LocalVertex lv;
          lv.segment = r.segment;
          lv.index = r.forward ? i : n - i;
          const double t = (offset + s.length * i / n) / len;
          switch (k) {
            case 0: lv.param = Vec2(U * t, 0.0); break;
            case 1: lv.param = Vec2(U, V * t); break;
            case 2: lv.param = Vec2(U * (1.0 - t), V); break;
            default: lv.param = Vec2(0.0, V * (1.0 - t)); break;
          }
          side[k].push_back(lv);
        }
        offset += s.length;
      }
      LocalVertex end;
      end.node = patch.boundary[patch.corners[(k + 1) % 4]];
      const std::array<Vec2, 4> rect = {Vec2(U, 0.0), Vec2(U, V), Vec2(0.0, V), Vec2(0.0, 0.0)};
      end.param = rect[k];
      side[k].push_back(end);
      side[k].front().segment = -1;
      side[k].front().node = patch.boundary[patch.corners[k]];
    }

    // Rows run from `bottom` to `top`; `left`/`right` climb from bottom to top.
    auto reversed = [](std::vector<LocalVertex> v) {
      std::reverse(v.begin(), v.end());
      return v;
    };
    const int a = static_cast<int>(side[0].size()) - 1, b = static_cast<int>(side[1].size()) - 1;
    const int c = static_cast<int>(side[2].size()) - 1;
    std::vector<LocalVertex> bottom, top, left, right;
    if (a != c || b == static_cast<int>(side[3].size()) - 1) {
      bottom = side[0], right = side[1], top = reversed(side[2]), left = reversed(side[3]);
    } else {
      bottom = side[1], right = side[2], top = reversed(side[3]), left = reversed(side[0]);
    }
    const int d = static_cast<int>(side[3].size()) - 1;
    if ((a != c && b != d) || (a - c + b - d) % 2 != 0) {
      flag(patch, "interval counts cannot be closed with transitions");
      ++local_stats.flagged_patches;
      continue;
    }
    const bool flip = bottom.size() < top.size();
    if (flip) {
      std::swap(bottom, top);
      left = reversed(left);
      right = reversed(right);
    }
    const int rows = static_cast<int>(left.size()) - 1;
    const int w0 = static_cast<int>(bottom.size()) - 1, wt = static_cast<int>(top.size()) - 1;
    std::vector<int> width(rows + 1), templates(rows, 0);
    int remaining = (w0 - wt) / 2;
    width[0] = w0;
    for (int j = 0; j < rows; ++j) {
      templates[j] = std::min(remaining, width[j] / 3);
      remaining -= templates[j];
      width[j + 1] = width[j] - 2 * templates[j];
    }
    if (remaining > 0 || rows != static_cast<int>(right.size()) - 1) {
      flag(patch, "not enough rows for interval transitions");
      ++local_stats.flagged_patches;
      continue;
    }

    // Local vertices: lines[j][i], then template interiors.
    std::vector<LocalVertex> verts;
    std::vector<std::vector<int>> line(rows + 1);
    auto push = [&](const LocalVertex& lv) {
      verts.push_back(lv);
      return static_cast<int>(verts.size()) - 1;
    };
    auto coons = [&](double s, double t) {
      return Vec2((1.0 - t) * lerp_samples(bottom, s) + t * lerp_samples(top, s) +
                  (1.0 - s) * lerp_samples(left, t) + s * lerp_samples(right, t) -
                  ((1.0 - s) * (1.0 - t) * bottom.front().param + s * (1.0 - t) * bottom.back().param +
                   (1.0 - s) * t * top.front().param + s * t * top.back().param));
    };
    for (const auto& lv : bottom) line[0].push_back(push(lv));
    for (int j = 1; j < rows; ++j) {
      line[j].push_back(push(left[j]));
      for (int i = 1; i < width[j]; ++i) {
        LocalVertex lv;
        lv.param = coons(static_cast<double>(i) / width[j], static_cast<double>(j) / rows);
        line[j].push_back(push(lv));
      }
      line[j].push_back(push(right[j]));
    }
    if (rows > 0) {
      for (const auto& lv : top) line[rows].push_back(push(lv));
    }
    std::vector<std::array<int, 4>> quads;
    for (int j = 0; j < rows; ++j) {
      const auto& lo = line[j];
      const auto& hi = line[j + 1];
      const int t = templates[j];
      const int plain = width[j] - 3 * t;
      int ib = 0, it = 0;
      for (int m = 0; m <= t; ++m) {
        const int run = (m + 1) * plain / (t + 1) - m * plain / (t + 1);
        for (int r = 0; r < run; ++r, ++ib, ++it) quads.push_back({lo[ib], lo[ib + 1], hi[it + 1], hi[it]});
        if (m == t) break;
        const Vec2 t0 = verts[hi[it]].param, t1 = verts[hi[it + 1]].param;
        LocalVertex i1, i2;
        i1.param = 0.5 * (verts[lo[ib + 1]].param + (t0 + (t1 - t0) / 3.0));
        i2.param = 0.5 * (verts[lo[ib + 2]].param + (t0 + 2.0 * (t1 - t0) / 3.0));
        const int v1 = push(i1), v2 = push(i2);
        quads.push_back({lo[ib], lo[ib + 1], v1, hi[it]});
        quads.push_back({lo[ib + 1], lo[ib + 2], v2, v1});
        quads.push_back({lo[ib + 2], lo[ib + 3], hi[it + 1], v2});
        quads.push_back({v1, v2, hi[it + 1], hi[it]});
        ib += 3;
        it += 1;
      }
    }

    // Locate interior points before committing anything.
    const ParamLocator locator(mesh, patch);
    std::vector<Vec3> interior_pos(verts.size());
    int lookups = 0, snapped = 0;
    for (size_t i = 0; i < verts.size(); ++i) {
      if (verts[i].segment >= 0 || verts[i].node >= 0) continue;
      bool s = false;
      interior_pos[i] = locator.locate(verts[i].param, s);
      ++lookups;
      snapped += s;
    }
    local_stats.snapped += snapped;
    if (snapped > 0) {
      log_warn("patch " + std::to_string(p) + ": " + std::to_string(snapped) +
               " grid points snapped to the nearest triangle");
    }
    if (lookups > 0 && snapped > options.max_snap_fraction * lookups) {
      flag(patch, "too many grid points outside the parametrization");
      ++local_stats.flagged_patches;
      continue;
    }

    if (!options.share_line_vertices) registry.clear();
    std::vector<int> global(verts.size());
    for (size_t i = 0; i < verts.size(); ++i) {
      const auto& lv = verts[i];
      if (lv.node >= 0) {
        global[i] = registry.node(lv.node);
      } else if (lv.segment >= 0) {
        global[i] = registry.sample(lv.segment, lv.index);
      } else {
        global[i] = registry.add(interior_pos[i], VertexSource::kInterior, false, false);
      }
    }
    for (const auto& q : quads) {
      std::array<int, 4> g = {global[q[0]], global[q[1]], global[q[2]], global[q[3]]};
      if (flip) std::reverse(g.begin(), g.end());
      qm.quads.push_back(g);
      qm.quad_patch.push_back(p);
    }
  }
  if (stats) *stats = local_stats;
  return qm;
}

PolygonSoup to_polygons(const QuadMesh& qm) {
  PolygonSoup soup;
  soup.vertices = qm.vertices;
  for (const auto& q : qm.quads) soup.polygons.push_back({q[0], q[1], q[2], q[3]});
  return soup;
}

QuadMesh quad_mesh_from_polygons(const PolygonSoup& soup) {
  QuadMesh qm;
  qm.vertices = soup.vertices;
  for (const auto& p : soup.polygons) {
    if (p.size() != 4) throw MeshError("polygon with " + std::to_string(p.size()) + " vertices in a quad mesh");
    qm.quads.push_back({p[0], p[1], p[2], p[3]});
    qm.quad_patch.push_back(-1);
  }
  return qm;
}

CorruptionReport corruption_check(const QuadMesh& qm) {
  CorruptionReport r;
  const size_t nq = qm.quads.size();
  const bool tagged = qm.provenance.size() == qm.vertices.size() &&
                      qm.on_mesh_boundary.size() == qm.vertices.size() &&
                      qm.on_nonmanifold.size() == qm.vertices.size();

  std::vector<std::array<int, 4>> sorted(nq);
  for (size_t i = 0; i < nq; ++i) {
    sorted[i] = qm.quads[i];
    std::sort(sorted[i].begin(), sorted[i].end());
    if (std::adjacent_find(sorted[i].begin(), sorted[i].end()) != sorted[i].end()) ++r.repeated_vertex_quads;
  }
  std::sort(sorted.begin(), sorted.end());
  for (size_t i = 1; i < nq; ++i) r.duplicate_quads += sorted[i] == sorted[i - 1];

  std::vector<std::tuple<int, int, int>> half;  // (lo, hi, quad)
  half.reserve(nq * 4);
  for (size_t i = 0; i < nq; ++i) {
    for (int k = 0; k < 4; ++k) {
      const int a = qm.quads[i][k], b = qm.quads[i][(k + 1) % 4];
      if (a != b) half.emplace_back(std::min(a, b), std::max(a, b), static_cast<int>(i));
    }
  }
  std::sort(half.begin(), half.end());
  std::vector<Vec3> normal(nq, Vec3::Zero());
  for (size_t i = 0; i < nq; ++i) {
    Vec3 n = Vec3::Zero();
    for (int k = 0; k < 4; ++k) n += qm.vertices[qm.quads[i][k]].cross(qm.vertices[qm.quads[i][(k + 1) % 4]]);
    const double len = n.norm();
    normal[i] = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }
  std::vector<Vec3> neighborhood = normal;
  for (size_t i = 0; i < half.size();) {
    size_t j = i;
    while (j < half.size() && std::get<0>(half[j]) == std::get<0>(half[i]) &&
           std::get<1>(half[j]) == std::get<1>(half[i])) {
      ++j;
    }
    const int a = std::get<0>(half[i]), b = std::get<1>(half[i]);
    const size_t count = j - i;
    if (count > 2 && !(tagged && qm.on_nonmanifold[a] && qm.on_nonmanifold[b])) ++r.nonmanifold_edges;
    if (count == 1 && tagged) {
      auto broken = [&](int v) { return qm.provenance[v] == VertexSource::kLine && !qm.on_mesh_boundary[v]; };
      if (broken(a) || broken(b)) ++r.fracture_edges;
    }
    if (count == 2) {
      const int q0 = std::get<2>(half[i]), q1 = std::get<2>(half[i + 1]);
      neighborhood[q0] += normal[q1];
      neighborhood[q1] += normal[q0];
    }
    i = j;
  }
  for (size_t i = 0; i < nq; ++i) r.flipped_quads += normal[i].dot(neighborhood[i]) < 0.0;
  r.corrupt = r.duplicate_quads || r.repeated_vertex_quads || r.nonmanifold_edges || r.fracture_edges ||
              r.flipped_quads;
  return r;
}

// --- Driver --------------------------------------------------------------------

RemeshResult remesh_with_lines(const TriMesh& mesh, StructLineGraph lines, const CrossField& field,
                               const RemeshOptions& options) {
  if (field.size() != mesh.num_faces()) {
    throw std::invalid_argument("remesh: field size does not match face count");
  }
  RemeshResult res;
  res.lines = std::move(lines);
  const double target = options.target_len > 0.0 ? options.target_len : 0.02 * mesh.bbox_diagonal();
  res.layout = partition(mesh, res.lines, options.partition);
  const auto frames = face_frames(mesh);
  const auto junction = layout_junctions(mesh, res.layout);
  for (auto& patch : res.layout.patches) {
    if (patch.disk && !patch.unmeshable) parametrize_patch(mesh, frames, patch, field, junction);
  }
  res.plan = assign_intervals(mesh, res.layout, target);
  ExtractStats stats;
  res.quads = extract_quads(mesh, res.layout, res.plan, options.extract, &stats);

  RemeshReport& r = res.report;
  r.structural_edges = static_cast<int>(res.lines.structural_edges.size());
  r.polylines = static_cast<int>(res.lines.polylines.size());
  r.pruned_edges = res.lines.pruned_edges;
  r.patches = static_cast<int>(res.layout.patches.size());
  r.added_cut_edges = res.layout.added_cut_edges;
  r.demoted_edges = res.layout.demoted_edges;
  r.target_len = target;
  r.segments = static_cast<int>(res.plan.segments.size());
  r.interval_rounds = res.plan.rounds;
  r.interval_mismatches = res.plan.residual_mismatches;
  r.t_transitions = res.plan.t_transitions;
  r.snapped_points = stats.snapped;
  for (size_t p = 0; p < res.layout.patches.size(); ++p) {
    const auto& patch = res.layout.patches[p];
    if (patch.unmeshable) {
      r.unmeshable.push_back({static_cast<int>(p), static_cast<int>(patch.faces.size()), patch.issue});
    }
  }
  r.corruption = corruption_check(res.quads);
  return res;
}

RemeshResult remesh(const TriMesh& mesh, std::span<const double> edge_prob, const CrossField& field,
                    const RemeshOptions& options) {
  return remesh_with_lines(mesh, extract_lines(mesh, edge_prob, options.lines), field, options);
}

std::string format_remesh_report(const RemeshReport& r) {
  std::ostringstream out;
  out << "# lq-remesh-report 1\n"
      << "structural_edges " << r.structural_edges << '\n'
      << "polylines " << r.polylines << '\n'
      << "pruned_edges " << r.pruned_edges << '\n'
      << "patches " << r.patches << '\n'
      << "added_cut_edges " << r.added_cut_edges << '\n'
      << "demoted_edges " << r.demoted_edges << '\n'
      << "target_len " << r.target_len << '\n'
      << "segments " << r.segments << '\n'
      << "interval_rounds " << r.interval_rounds << '\n'
      << "interval_mismatches " << r.interval_mismatches << '\n'
      << "t_transitions " << r.t_transitions << '\n'
      << "snapped_points " << r.snapped_points << '\n'
      << "unmeshable_patches " << r.unmeshable.size() << '\n';
  for (const auto& u : r.unmeshable) {
    out << "unmeshable " << u.patch << " faces=" << u.faces << " reason=" << u.reason << '\n';
  }
  const auto& c = r.corruption;
  out << "duplicate_quads " << c.duplicate_quads << '\n'
      << "repeated_vertex_quads " << c.repeated_vertex_quads << '\n'
      << "nonmanifold_edges " << c.nonmanifold_edges << '\n'
      << "fracture_edges " << c.fracture_edges << '\n'
      << "flipped_quads " << c.flipped_quads << '\n'
      << "corrupt " << (c.corrupt ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace lq
