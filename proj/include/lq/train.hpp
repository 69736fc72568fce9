#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lq/crossfield.hpp"
#include "lq/model.hpp"

namespace lq {

struct TrainConfig {
  double w_struct = 0.1;
  double w_crossfield = 1.0;
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int steps = 1000;
  int batch_size = 1;  // meshes per step
  uint64_t seed = 0;
  double rho_feature = 10.0;
  bool invert_feature_weight = false;
  int pos_ratio = 1;
  int neg_ratio = 2;
  int query_cap = 8192;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

// w_struct * ls + w_crossfield * lf.
double loss_total(double ls, double lf, const TrainConfig& cfg);

// One mesh with its supervision.
struct TrainingExample {
  TriMesh mesh;
  MeshInputs inputs;
  std::vector<char> labels;  // per edge
  ad::Mat targets;           // per face, polyvector reals
  std::vector<double> dp;    // per face feature weight
  std::string name;
};

TrainingExample make_example(TriMesh mesh, std::vector<char> labels, const CrossField& field,
                             const ModelConfig& mcfg, const TrainConfig& tcfg, uint64_t seed,
                             std::string name = {});

struct LossTerms {
  ad::Var total, structure, field;
};

// Loss over the given edge and face query subsets of one example.
LossTerms build_loss(ad::Graph& g, Model& model, const TrainingExample& ex,
                     std::span<const int> edges, std::span<const int> faces,
                     const TrainConfig& cfg);

// Edge subset (1:2 positive/negative, capped) and face subset (uniform, capped)
// for a training step.
struct QueryBatch {
  std::vector<int> edges;
  std::vector<int> faces;
};
QueryBatch sample_batch(const TrainingExample& ex, const TrainConfig& cfg, uint64_t seed);

struct StepLosses {
  double total = 0.0;
  double structure = 0.0;
  double field = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bias-corrected Adam step over every parameter; clears gradients.
void adam_step(std::vector<ad::Param>& params, const TrainConfig& cfg, int step);

struct TrainResult {
  Model model;
  std::vector<StepLosses> history;
};

// Seeded, deterministic. Meshes are visited round robin, batch_size per step.
// A non-finite loss throws TrainingError after writing the batch description
// to checkpoint_dir (when set).
TrainResult train(std::span<const TrainingExample> corpus, const ModelConfig& mcfg,
                  const TrainConfig& tcfg);

// --- Dataset files -------------------------------------------------------------

// Structure labels: header `# lq-struct 1 edges=<k>`, then one `<a> <b>` line
// (0-based vertex ids) per structural edge.
void save_struct_labels(const std::filesystem::path& path, const TriMesh& mesh,
                        std::span<const char> labels);
std::vector<char> load_struct_labels(const std::filesystem::path& path, const TriMesh& mesh);

// Manifest: header `# lq-manifest 1`, then `<mesh> <labels> <field>` per line;
// relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::filesystem::path mesh, labels, field;
};
void save_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

std::vector<TrainingExample> load_corpus(const std::filesystem::path& manifest,
                                         const ModelConfig& mcfg, const TrainConfig& tcfg);

}  // namespace lq
