#include "lq/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lq/rng.hpp"

namespace lq {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
  if (width < 1) fail("width must be positive");
  if (heads < 1 || width % heads != 0) fail("width must be divisible by heads");
  if (enc_self_layers < 0 || dec_cross_layers < 0) fail("layer counts must be non-negative");
  if (ffn_mult < 1) fail("ffn_mult must be positive");
  if (frequencies < 0 || frequencies > 16) fail("frequencies out of range [0, 16]");
  if (!std::isfinite(w_prior)) fail("w_prior must be finite");
  if (!(tau_degrees > 0.0 && tau_degrees < 180.0)) fail("tau must lie in (0, 180)");
  if (n_desire < 1) fail("n_desire must be positive");
  if (n_uniform_anchors < 0 || n_salient_anchors < 0 ||
      n_uniform_anchors + n_salient_anchors < 1) {
    fail("anchor counts must be non-negative with a positive sum");
  }
  if (neighbor_cap < 1) fail("neighbor_cap must be positive");
}

ad::Mat point_features(std::span<const Vec3> positions, std::span<const Vec3> normals,
                       std::span<const Vec3> tangents, const Vec3& center, double scale,
                       int frequencies) {
  const int n = static_cast<int>(positions.size());
  const int dim = 9 + 6 * frequencies;
  ad::Mat out = ad::Mat::Zero(n, dim);
  for (int i = 0; i < n; ++i) {
    const Vec3 p = (positions[i] - center) / scale;
    int c = 0;
    for (int k = 0; k < 3; ++k) out(i, c++) = p[k];
    for (int f = 0; f < frequencies; ++f) {
      const double w = kPi * std::ldexp(1.0, f);
      for (int k = 0; k < 3; ++k) {
        out(i, c++) = std::sin(w * p[k]);
        out(i, c++) = std::cos(w * p[k]);
      }
    }
    for (int k = 0; k < 3; ++k) out(i, c++) = normals[i][k];
    if (!tangents.empty()) {
      for (int k = 0; k < 3; ++k) out(i, c + k) = tangents[i][k];
    }
  }
  return out;
}

namespace {

ad::Csr to_csr(const std::vector<std::vector<int>>& rows) {
  ad::Csr c;
  for (const auto& r : rows) c.push_row(r);
  return c;
}

ad::Mat pool_features(const PointSet& ps, const Vec3& center, double scale, int freq) {
  return point_features(ps.positions, ps.normals, {}, center, scale, freq);
}

}  // namespace

MeshInputs prepare_inputs(const TriMesh& mesh, const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  MeshInputs in;
  const auto [lo, hi] = mesh.bbox();
  in.center = 0.5 * (lo + hi);
  in.scale = std::max(0.5 * (hi - lo).norm(), 1e-12);
  in.saliency = compute_saliency(mesh, cfg.tau_degrees);

  const auto salient = sample_salient(mesh, in.saliency, cfg.n_desire, derive_seed(seed, 1));
  in.salient_pool = salient.points;
  in.uniform_pool = sample_uniform(mesh, cfg.n_desire, derive_seed(seed, 2));
  in.anchors = build_anchor_set(in.uniform_pool, in.salient_pool, cfg.n_uniform_anchors,
                                cfg.n_salient_anchors, derive_seed(seed, 3));
  const int freq = cfg.frequencies;
  in.anchor_feat = pool_features(in.anchors.points, in.center, in.scale, freq);
  in.uniform_feat = pool_features(in.uniform_pool, in.center, in.scale, freq);
  in.salient_feat = pool_features(in.salient_pool, in.center, in.scale, freq);

  const auto eq = build_edge_queries(mesh, in.saliency, cfg.neighbor_cap);
  std::vector<Vec3> pos, nrm, tan;
  std::vector<std::vector<int>> lists;
  for (const auto& q : eq) {
    pos.push_back(q.position);
    nrm.push_back(q.normal);
    tan.push_back(mesh.edge_vector(q.edge_id).normalized());
    lists.push_back(q.neighborhood);
    in.prior.push_back(q.prior_flag ? 1 : 0);
  }
  in.edge_query_feat = point_features(pos, nrm, tan, in.center, in.scale, freq);
  in.edge_lists = to_csr(lists);

  const auto frames = face_frames(mesh);
  const auto fq = build_face_queries(mesh, cfg.neighbor_cap);
  pos.clear();
  nrm.clear();
  tan.clear();
  lists.clear();
  for (const auto& q : fq) {
    pos.push_back(q.position);
    nrm.push_back(q.normal);
    tan.push_back(frames[q.face_id].valid ? frames[q.face_id].e1 : Vec3::Zero());
    lists.push_back(q.neighborhood);
  }
  in.face_query_feat = point_features(pos, nrm, tan, in.center, in.scale, freq);
  in.face_table_feat = point_features(pos, nrm, {}, in.center, in.scale, freq);
  in.face_lists = to_csr(lists);

  const auto table = build_neighbor_table(mesh);
  in.point_table_feat =
      point_features(table.positions, table.normals, {}, in.center, in.scale, freq);
  return in;
}

ad::Csr select_rows(const ad::Csr& lists, std::span<const int> rows) {
  ad::Csr out;
  for (int r : rows) {
    out.push_row(std::span<const int>(lists.indices.data() + lists.offsets[r],
                                      lists.offsets[r + 1] - lists.offsets[r]));
  }
  return out;
}

ad::Mat select_rows(const ad::Mat& m, std::span<const int> rows) {
  ad::Mat out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

// --- Model -----------------------------------------------------------------

int Model::add_param(const std::string& name, ad::Mat value) {
  ad::Param p;
  p.name = name;
  p.value = std::move(value);
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

Model::Linear Model::make_linear(const std::string& name, int in, int out, uint64_t& seed) {
  Rng rng(derive_seed(seed++, 0));
  const double a = std::sqrt(6.0 / (in + out));
  ad::Mat w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * rng.uniform() - 1.0) * a;
  Linear l;
  l.w = add_param(name + ".w", std::move(w));
  l.b = add_param(name + ".b", ad::Mat::Zero(1, out));
  return l;
}

Model::Norm Model::make_norm(const std::string& name, int dim) {
  Norm n;
  n.g = add_param(name + ".g", ad::Mat::Ones(1, dim));
  n.b = add_param(name + ".b", ad::Mat::Zero(1, dim));
  return n;
}

Model::Block Model::make_block(const std::string& name, bool cross, uint64_t& seed) {
  const int w = cfg_.width;
  Block b;
  b.ln_q = make_norm(name + ".ln_q", w);
  if (cross) b.ln_kv = make_norm(name + ".ln_kv", w);
  b.attn.q = make_linear(name + ".attn.q", w, w, seed);
  b.attn.k = make_linear(name + ".attn.k", w, w, seed);
  b.attn.v = make_linear(name + ".attn.v", w, w, seed);
  b.attn.o = make_linear(name + ".attn.o", w, w, seed);
  b.ln_ff = make_norm(name + ".ln_ff", w);
  b.ff1 = make_linear(name + ".ff1", w, w * cfg_.ffn_mult, seed);
  b.ff2 = make_linear(name + ".ff2", w * cfg_.ffn_mult, w, seed);
  return b;
}

Model::Model(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const int w = cfg_.width, fd = cfg_.feature_dim();
  surface_embed_ = make_linear("embed.surface", fd, w, seed);
  token_embed_ = make_linear("embed.token", fd, w, seed);
  enc_cross_u_ = make_block("enc.cross_u", true, seed);
  enc_cross_a_ = make_block("enc.cross_a", true, seed);
  for (int i = 0; i < cfg_.enc_self_layers; ++i) {
    enc_self_.push_back(make_block("enc.self" + std::to_string(i), false, seed));
  }
  latent_norm_ = make_norm("enc.out_norm", w);
  local_edge_ = make_block("local.edge", false, seed);
  local_face_ = make_block("local.face", false, seed);
  for (int i = 0; i < cfg_.dec_cross_layers; ++i) {
    dec_struct_.push_back(make_block("dec.struct" + std::to_string(i), true, seed));
  }
  for (int i = 0; i < cfg_.dec_cross_layers; ++i) {
    dec_field_.push_back(make_block("dec.field" + std::to_string(i), true, seed));
  }
  struct_norm_ = make_norm("head.struct_norm", w);
  struct_head_ = make_linear("head.struct", w, 1, seed);
  field_norm_ = make_norm("head.field_norm", w);
  field_head_ = make_linear("head.field", w, 4, seed);
}

ad::Param& Model::param(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named " + name);
}

size_t Model::num_scalars() const {
  size_t n = 0;
  for (const auto& p : params_) n += static_cast<size_t>(p.value.size());
  return n;
}

ad::Var Model::apply(ad::Graph& g, const Linear& l, ad::Var x) {
  return g.linear(x, P(g, l.w), P(g, l.b));
}

ad::Var Model::apply(ad::Graph& g, const Norm& n, ad::Var x) {
  return g.layer_norm(x, P(g, n.g), P(g, n.b));
}

ad::Var Model::feed_forward(ad::Graph& g, const Block& b, ad::Var x) {
  const ad::Var h = g.gelu(apply(g, b.ff1, apply(g, b.ln_ff, x)));
  return g.add(x, apply(g, b.ff2, h));
}

ad::Var Model::block(ad::Graph& g, const Block& b, ad::Var x, ad::Var kv, bool cross) {
  const ad::Var hq = apply(g, b.ln_q, x);
  const ad::Var hk = cross ? apply(g, b.ln_kv, kv) : hq;
  const ad::Var a = g.attention(apply(g, b.attn.q, hq), apply(g, b.attn.k, hk),
                                apply(g, b.attn.v, hk), cfg_.heads);
  return feed_forward(g, b, g.add(x, apply(g, b.attn.o, a)));
}

ad::Var Model::embed(ad::Graph& g, Embedder which, const ad::Mat& features) {
  if (features.cols() != cfg_.feature_dim()) {
    throw std::invalid_argument("embed: feature width does not match the model");
  }
  return apply(g, which == Embedder::kSurface ? surface_embed_ : token_embed_,
               g.constant(features));
}

ad::Var Model::encode(ad::Graph& g, const ad::Mat& anchor_feat, const ad::Mat& uniform_feat,
                      const ad::Mat& salient_feat) {
  if (anchor_feat.rows() == 0) throw std::invalid_argument("encode: empty anchor set");
  const ad::Var a = embed(g, Embedder::kSurface, anchor_feat);
  const ad::Var u = embed(g, Embedder::kSurface, uniform_feat);
  const ad::Var s = embed(g, Embedder::kSurface, salient_feat);
  ad::Var c = g.add(block(g, enc_cross_u_, a, u, true), block(g, enc_cross_a_, a, s, true));
  for (const auto& b : enc_self_) c = block(g, b, c, c, false);
  return apply(g, latent_norm_, c);
}

Model::TableKV Model::local_table(ad::Graph& g, QueryKind kind, const ad::Mat& table_feat) {
  const Block& b = kind == QueryKind::kEdge ? local_edge_ : local_face_;
  const ad::Var h = apply(g, b.ln_q, embed(g, Embedder::kToken, table_feat));
  return {apply(g, b.attn.k, h), apply(g, b.attn.v, h)};
}

ad::Var Model::local_context(ad::Graph& g, QueryKind kind, const ad::Mat& query_feat,
                             TableKV table, const ad::Csr& lists) {
  const Block& b = kind == QueryKind::kEdge ? local_edge_ : local_face_;
  const ad::Var t = embed(g, Embedder::kToken, query_feat);
  const ad::Var h = apply(g, b.ln_q, t);
  const ad::Var a = g.ragged_attention(apply(g, b.attn.q, h), apply(g, b.attn.k, h),
                                       apply(g, b.attn.v, h), table.k, table.v, lists, cfg_.heads);
  return feed_forward(g, b, g.add(t, apply(g, b.attn.o, a)));
}

ad::Var Model::struct_logits(ad::Graph& g, ad::Var x_e, ad::Var z) {
  ad::Var x = x_e;
  for (const auto& b : dec_struct_) x = block(g, b, x, z, true);
  return apply(g, struct_head_, apply(g, struct_norm_, x));
}

ad::Var Model::decode_struct(ad::Graph& g, ad::Var x_e, ad::Var z, std::span<const char> prior) {
  const ad::Var s = struct_logits(g, x_e, z);
  ad::Mat bias(g.value(s).rows(), 1);
  if (static_cast<Eigen::Index>(prior.size()) != bias.rows()) {
    throw std::invalid_argument("decode_struct: prior flag count mismatch");
  }
  for (Eigen::Index i = 0; i < bias.rows(); ++i) bias(i, 0) = prior[i] ? cfg_.w_prior : 0.0;
  return g.sigmoid(g.add_constant(s, bias));
}

ad::Var Model::decode_field(ad::Graph& g, ad::Var x_f, ad::Var z) {
  ad::Var x = x_f;
  for (const auto& b : dec_field_) x = block(g, b, x, z, true);
  return apply(g, field_head_, apply(g, field_norm_, x));
}

// --- Inference ---------------------------------------------------------------

Prediction predict(const TriMesh& mesh, Model& model, uint64_t seed, int chunk) {
  return predict(mesh, prepare_inputs(mesh, model.config(), seed), model, chunk);
}

Prediction predict(const TriMesh& mesh, const MeshInputs& in, Model& model, int chunk) {
  chunk = std::max(chunk, 1);
  ad::Mat z, ke, ve, kf, vf;
  {
    ad::Graph g(false);
    z = g.value(model.encode(g, in.anchor_feat, in.uniform_feat, in.salient_feat));
    const auto et = model.local_table(g, Model::QueryKind::kEdge, in.point_table_feat);
    ke = g.value(et.k);
    ve = g.value(et.v);
    const auto ft = model.local_table(g, Model::QueryKind::kFace, in.face_table_feat);
    kf = g.value(ft.k);
    vf = g.value(ft.v);
  }

  Prediction out;
  const int ne = mesh.num_edges(), nf = mesh.num_faces();
  out.edge_prob.resize(ne);
  std::vector<int> rows;
  for (int start = 0; start < ne; start += chunk) {
    rows.clear();
    for (int i = start; i < std::min(ne, start + chunk); ++i) rows.push_back(i);
    ad::Graph g(false);
    const ad::Var zc = g.constant(z);
    const Model::TableKV table{g.constant(ke), g.constant(ve)};
    const ad::Var x = model.local_context(g, Model::QueryKind::kEdge,
                                          select_rows(in.edge_query_feat, rows), table,
                                          select_rows(in.edge_lists, rows));
    std::vector<char> prior(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) prior[i] = in.prior[rows[i]];
    const ad::Mat& p = g.value(model.decode_struct(g, x, zc, prior));
    for (size_t i = 0; i < rows.size(); ++i) out.edge_prob[rows[i]] = p(i, 0);
  }

  out.polyvectors.resize(nf);
  out.field.theta.assign(nf, 0.0);
  out.field.valid.assign(nf, 0);
  const auto frames = face_frames(mesh);
  for (int start = 0; start < nf; start += chunk) {
    rows.clear();
    for (int i = start; i < std::min(nf, start + chunk); ++i) rows.push_back(i);
    ad::Graph g(false);
    const ad::Var zc = g.constant(z);
    const Model::TableKV table{g.constant(kf), g.constant(vf)};
    const ad::Var x = model.local_context(g, Model::QueryKind::kFace,
                                          select_rows(in.face_query_feat, rows), table,
                                          select_rows(in.face_lists, rows));
    const ad::Mat& r = g.value(model.decode_field(g, x, zc));
    for (size_t i = 0; i < rows.size(); ++i) {
      const int f = rows[i];
      out.polyvectors[f] = {r(i, 0), r(i, 1), r(i, 2), r(i, 3)};
      const auto theta = decode_polyvector(PolyVector::from_target(out.polyvectors[f]));
      if (theta && frames[f].valid && std::isfinite(*theta)) {
        out.field.theta[f] = *theta;
        out.field.valid[f] = 1;
      } else {
        out.decode_failures.push_back(f);
      }
    }
  }
  return out;
}

// --- Checkpoints -------------------------------------------------------------

namespace {

constexpr char kCkptMagic[8] = {'L', 'Q', 'C', 'K', 'P', 'T', '0', '1'};
constexpr uint32_t kCkptVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write(kCkptMagic, sizeof kCkptMagic);
  put<uint32_t>(out, kCkptVersion);
  const ModelConfig& c = model.config();
  for (int v : {c.width, c.heads, c.enc_self_layers, c.dec_cross_layers, c.ffn_mult, c.frequencies,
                c.n_desire, c.n_uniform_anchors, c.n_salient_anchors, c.neighbor_cap}) {
    put<int32_t>(out, v);
  }
  put<double>(out, c.w_prior);
  put<double>(out, c.tau_degrees);
  put<uint32_t>(out, static_cast<uint32_t>(model.params().size()));
  for (const auto& p : model.params()) {
    put<uint32_t>(out, static_cast<uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<uint32_t>(out, static_cast<uint32_t>(p.value.rows()));
    put<uint32_t>(out, static_cast<uint32_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) put<double>(out, p.value.data()[i]);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCkptMagic, sizeof magic) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const auto version = get<uint32_t>(in);
  if (version != kCkptVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  for (int* v : {&c.width, &c.heads, &c.enc_self_layers, &c.dec_cross_layers, &c.ffn_mult,
                 &c.frequencies, &c.n_desire, &c.n_uniform_anchors, &c.n_salient_anchors,
                 &c.neighbor_cap}) {
    *v = get<int32_t>(in);
  }
  c.w_prior = get<double>(in);
  c.tau_degrees = get<double>(in);
  Model model(c, 0);
  const auto count = get<uint32_t>(in);
  if (count != model.params().size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (auto& p : model.params_) {
    const auto len = get<uint32_t>(in);
    if (len > 4096) throw std::runtime_error("checkpoint parameter name too long");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw std::runtime_error("checkpoint truncated");
    const auto rows = get<uint32_t>(in);
    const auto cols = get<uint32_t>(in);
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      throw std::runtime_error("checkpoint tensor mismatch at " + name);
    }
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = get<double>(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("trailing bytes in checkpoint");
  return model;
}

uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  return h;
}

}  // namespace lq
