#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lq/config.hpp"
#include "lq/metrics.hpp"
#include "lq/model.hpp"
#include "lq/remeshing.hpp"

namespace lq {

// A stage failed; artifacts of the stages before it stay on disk.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Oracle guidance: salient edges become the structure probabilities (0 or 1)
// and the smoothed field aligned to them is the cross-field.
struct Guidance {
  std::vector<double> edge_prob;
  CrossField field;
};
Guidance oracle_guidance(const TriMesh& mesh, const PipelineConfig& cfg);
Guidance model_guidance(const TriMesh& mesh, Model& model, const PipelineConfig& cfg);

struct PipelineResult {
  bool oracle_mode = true;
  Guidance guidance;
  RemeshResult remesh;
  MetricsReport metrics;
};

// Guidance (model when given, else oracle), remeshing and metrics, each stage
// timed. With `out_dir` set, every stage writes its artifacts as soon as it
// finishes: edge_prob.txt, field.txt, quads.obj, remesh_report.txt and
// metrics.csv.
PipelineResult run_pipeline(const TriMesh& mesh, const PipelineConfig& cfg, Model* model,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

RemeshOptions remesh_options(const PipelineConfig& cfg);

// One probability per line, shortest round-trip form.
void save_edge_probs(const std::filesystem::path& path, const std::vector<double>& probs);
std::vector<double> load_edge_probs(const std::filesystem::path& path);

}  // namespace lq
