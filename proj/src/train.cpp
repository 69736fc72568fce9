#include "lq/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lq/log.hpp"
#include "lq/rng.hpp"

namespace lq {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (!(w_struct >= 0.0) || !(w_crossfield >= 0.0)) fail("loss weights must be non-negative");
  if (!(lr > 0.0)) fail("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
  if (steps < 1) fail("steps must be at least 1");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (!(rho_feature >= 0.0)) fail("rho_feature must be non-negative");
  if (pos_ratio < 1 || neg_ratio < 0) fail("pos:neg ratio must be >= 1 : >= 0");
  if (query_cap < 1) fail("query_cap must be positive");
  if (checkpoint_every < 0) fail("checkpoint_every must be non-negative");
}

double loss_total(double ls, double lf, const TrainConfig& cfg) {
  return cfg.w_struct * ls + cfg.w_crossfield * lf;
}

TrainingExample make_example(TriMesh mesh, std::vector<char> labels, const CrossField& field,
                             const ModelConfig& mcfg, const TrainConfig& tcfg, uint64_t seed,
                             std::string name) {
  if (static_cast<int>(labels.size()) != mesh.num_edges()) {
    throw std::invalid_argument("make_example: label count does not match edge count");
  }
  if (field.size() != mesh.num_faces()) {
    throw std::invalid_argument("make_example: field size does not match face count");
  }
  TrainingExample ex;
  ex.inputs = prepare_inputs(mesh, mcfg, seed);
  ex.labels = std::move(labels);
  ex.name = std::move(name);
  const int nf = mesh.num_faces();
  ex.targets = ad::Mat::Zero(nf, 4);
  ex.dp.assign(nf, 0.0);
  const auto dist = feature_distances(mesh, ex.inputs.saliency);
  for (int f = 0; f < nf; ++f) {
    if (!field.valid[f]) continue;
    const auto t = encode_polyvector(field.theta[f]).to_target();
    for (int k = 0; k < 4; ++k) ex.targets(f, k) = t[k];
    ex.dp[f] = feature_weight(dist[f], tcfg.rho_feature, tcfg.invert_feature_weight);
  }
  ex.mesh = std::move(mesh);
  return ex;
}

LossTerms build_loss(ad::Graph& g, Model& model, const TrainingExample& ex,
                     std::span<const int> edges, std::span<const int> faces,
                     const TrainConfig& cfg) {
  const MeshInputs& in = ex.inputs;
  const ad::Var z = model.encode(g, in.anchor_feat, in.uniform_feat, in.salient_feat);

  const auto et = model.local_table(g, Model::QueryKind::kEdge, in.point_table_feat);
  const ad::Var xe = model.local_context(g, Model::QueryKind::kEdge,
                                         select_rows(in.edge_query_feat, edges), et,
                                         select_rows(in.edge_lists, edges));
  std::vector<char> prior;
  std::vector<double> labels;
  for (int e : edges) {
    prior.push_back(in.prior[e]);
    labels.push_back(ex.labels[e] ? 1.0 : 0.0);
  }
  const ad::Var ls = g.bce(model.decode_struct(g, xe, z, prior), labels);

  const auto ft = model.local_table(g, Model::QueryKind::kFace, in.face_table_feat);
  const ad::Var xf = model.local_context(g, Model::QueryKind::kFace,
                                         select_rows(in.face_query_feat, faces), ft,
                                         select_rows(in.face_lists, faces));
  std::vector<double> w;
  for (int f : faces) w.push_back(ex.dp[f]);
  const ad::Var lf = g.weighted_mse(model.decode_field(g, xf, z), select_rows(ex.targets, faces), w);

  return {g.lincomb(ls, cfg.w_struct, lf, cfg.w_crossfield), ls, lf};
}

QueryBatch sample_batch(const TrainingExample& ex, const TrainConfig& cfg, uint64_t seed) {
  QueryBatch b;
  b.edges = sample_training_queries(ex.labels, cfg.pos_ratio, cfg.neg_ratio, cfg.query_cap,
                                    derive_seed(seed, 0))
                .indices;
  const int nf = ex.mesh.num_faces();
  b.faces.resize(nf);
  for (int f = 0; f < nf; ++f) b.faces[f] = f;
  if (nf > cfg.query_cap) {
    Rng rng(derive_seed(seed, 1));
    for (int i = 0; i < cfg.query_cap; ++i) {
      std::swap(b.faces[i], b.faces[i + static_cast<int>(rng.below(nf - i))]);
    }
    b.faces.resize(cfg.query_cap);
    std::sort(b.faces.begin(), b.faces.end());
  }
  return b;
}

void adam_step(std::vector<ad::Param>& params, const TrainConfig& cfg, int step) {
  const double t = static_cast<double>(step) + 1.0;
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& p : params) {
    if (p.m.size() == 0) p.m = ad::Mat::Zero(p.value.rows(), p.value.cols());
    if (p.v.size() == 0) p.v = ad::Mat::Zero(p.value.rows(), p.value.cols());
    if (p.grad.size() == 0) p.grad = ad::Mat::Zero(p.value.rows(), p.value.cols());
    p.m = cfg.beta1 * p.m + (1.0 - cfg.beta1) * p.grad;
    p.v = cfg.beta2 * p.v + (1.0 - cfg.beta2) * p.grad.cwiseAbs2();
    p.value.array() -=
        cfg.lr * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + cfg.adam_eps);
    p.grad.setZero();
  }
}

TrainResult train(std::span<const TrainingExample> corpus, const ModelConfig& mcfg,
                  const TrainConfig& tcfg) {
  if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
  tcfg.validate();
  TrainResult res{Model(mcfg, derive_seed(tcfg.seed, 100)), {}};
  res.history.reserve(tcfg.steps);
  if (!tcfg.checkpoint_dir.empty()) std::filesystem::create_directories(tcfg.checkpoint_dir);

  for (int step = 0; step < tcfg.steps; ++step) {
    StepLosses acc;
    for (int b = 0; b < tcfg.batch_size; ++b) {
      const size_t idx = (static_cast<size_t>(step) * tcfg.batch_size + b) % corpus.size();
      const TrainingExample& ex = corpus[idx];
      const QueryBatch qb = sample_batch(ex, tcfg, derive_seed(tcfg.seed, 1000 + step * 64 + b));
      ad::Graph g;
      const LossTerms lt = build_loss(g, res.model, ex, qb.edges, qb.faces, tcfg);
      const double total = g.scalar(lt.total);
      if (!std::isfinite(total)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << step << " on example " << idx << " (" << ex.name
            << "): struct=" << g.scalar(lt.structure) << " field=" << g.scalar(lt.field)
            << ", edges=" << qb.edges.size() << ", faces=" << qb.faces.size();
        if (!tcfg.checkpoint_dir.empty()) {
          std::ofstream dump(tcfg.checkpoint_dir / ("bad_batch_step" + std::to_string(step) + ".txt"));
          dump << msg.str() << "\nedges";
          for (int e : qb.edges) dump << ' ' << e;
          dump << "\nfaces";
          for (int f : qb.faces) dump << ' ' << f;
          dump << '\n';
        }
        throw TrainingError(msg.str());
      }
      acc.total += total / tcfg.batch_size;
      acc.structure += g.scalar(lt.structure) / tcfg.batch_size;
      acc.field += g.scalar(lt.field) / tcfg.batch_size;
      g.backward(tcfg.batch_size == 1 ? lt.total : g.scale(lt.total, 1.0 / tcfg.batch_size));
    }
    adam_step(res.model.params(), tcfg, step);
    res.history.push_back(acc);
    log_info("step " + std::to_string(step) + " loss " + std::to_string(acc.total));
    if (tcfg.checkpoint_every > 0 && !tcfg.checkpoint_dir.empty() &&
        (step + 1) % tcfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%06d.ckpt", step + 1);
      save_checkpoint(tcfg.checkpoint_dir / name, res.model);
    }
  }
  return res;
}

// --- Dataset files -------------------------------------------------------------

void save_struct_labels(const std::filesystem::path& path, const TriMesh& mesh,
                        std::span<const char> labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write labels: " + path.string());
  const auto count = std::count_if(labels.begin(), labels.end(), [](char c) { return c != 0; });
  out << "# lq-struct 1 edges=" << count << '\n';
  for (int e = 0; e < mesh.num_edges(); ++e) {
    if (labels[e]) out << mesh.edges[e][0] << ' ' << mesh.edges[e][1] << '\n';
  }
}

std::vector<char> load_struct_labels(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# lq-struct 1", 0) != 0) {
    throw std::runtime_error("unsupported label file header: " + path.string());
  }
  std::vector<char> labels(mesh.num_edges(), 0);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int a, b;
    if (!(ls >> a >> b)) throw std::runtime_error("malformed label line: " + line);
    const int e = (a >= 0 && b >= 0 && a < mesh.num_vertices() && b < mesh.num_vertices())
                      ? mesh.find_edge(a, b)
                      : -1;
    if (e < 0) throw std::runtime_error("label references a missing edge: " + line);
    labels[e] = 1;
  }
  return labels;
}

void save_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
  out << "# lq-manifest 1\n";
  for (const auto& e : entries) {
    out << e.mesh.generic_string() << ' ' << e.labels.generic_string() << ' '
        << e.field.generic_string() << '\n';
  }
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# lq-manifest 1", 0) != 0) {
    throw std::runtime_error("unsupported manifest header: " + path.string());
  }
  const auto base = path.parent_path();
  std::vector<ManifestEntry> out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string m, l, f;
    if (!(ls >> m >> l >> f)) throw std::runtime_error("malformed manifest line: " + line);
    auto resolve = [&base](const std::string& p) {
      const std::filesystem::path q(p);
      return q.is_absolute() ? q : base / q;
    };
    out.push_back({resolve(m), resolve(l), resolve(f)});
  }
  return out;
}

std::vector<TrainingExample> load_corpus(const std::filesystem::path& manifest,
                                         const ModelConfig& mcfg, const TrainConfig& tcfg) {
  const auto entries = load_manifest(manifest);
  if (entries.empty()) throw std::runtime_error("manifest lists no examples: " + manifest.string());
  std::vector<TrainingExample> out;
  for (size_t i = 0; i < entries.size(); ++i) {
    TriMesh mesh = load_mesh(entries[i].mesh);
    auto labels = load_struct_labels(entries[i].labels, mesh);
    const CrossField field = load_field(entries[i].field);
    out.push_back(make_example(std::move(mesh), std::move(labels), field, mcfg, tcfg,
                               derive_seed(tcfg.seed, i), entries[i].mesh.string()));
  }
  return out;
}

}  // namespace lq
