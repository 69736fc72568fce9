#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lq/crossfield.hpp"
#include "lq/model.hpp"
#include "lq/remeshing.hpp"
#include "lq/train.hpp"

namespace lq {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every tunable of the pipeline. Defaults are the published values where the
// method declares them and desk-scale choices elsewhere; each key carries its
// provenance in the dumped file.
struct PipelineConfig {
  ModelConfig model;
  TrainConfig train;
  LineOptions lines;
  PartitionOptions partition;
  double target_len = 0.0;  // <= 0: 2% of the bounding-box diagonal
  FieldSolveOptions field;
  int chamfer_samples = 100000;
  int predict_chunk = 2048;
  uint64_t seed = 0;

  PipelineConfig();
  // Reduced sampling and anchor counts that train on one CPU core.
  static PipelineConfig desk();

  // Throws ConfigError naming the first out-of-range key.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string provenance;  // "paper" or "desk"
  std::string help;
};
const std::vector<ConfigKey>& config_keys();

// `# lq-config 1` header, then `key = value  # provenance` lines in a fixed
// order. Reals use the shortest round-trip form, so dump(load(dump(c))) is
// byte-identical to dump(c).
std::string dump_config(const PipelineConfig& cfg);
// Keys not present keep their defaults. Unknown keys, duplicates, malformed
// values, a missing or wrong header, and out-of-range values throw ConfigError.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const PipelineConfig& cfg);

}  // namespace lq
