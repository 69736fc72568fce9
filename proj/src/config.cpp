#include "lq/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace lq {

namespace {

std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  T x{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("config: bad value for " + key + ": '" + s + "'");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("config: " + key + " must be true or false, got '" + s + "'");
}

struct Entry {
  ConfigKey meta;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

template <typename T>
Entry number(std::string name, std::string prov, std::string help, T PipelineConfig::*group,
             auto member) {
  const std::string key = name;
  return {{std::move(name), std::move(prov), std::move(help)},
          [group, member](const PipelineConfig& c) {
            const auto v = (c.*group).*member;
            if constexpr (std::is_floating_point_v<decltype(v)>) return fmt(v);
            else return std::to_string(v);
          },
          [group, member, key](PipelineConfig& c, const std::string& s) {
            using V = std::remove_reference_t<decltype((c.*group).*member)>;
            (c.*group).*member = parse_number<V>(key, s);
          }};
}

template <typename T>
Entry top(std::string name, std::string prov, std::string help, T PipelineConfig::*member) {
  const std::string key = name;
  return {{std::move(name), std::move(prov), std::move(help)},
          [member](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          },
          [member, key](PipelineConfig& c, const std::string& s) {
            c.*member = parse_number<T>(key, s);
          }};
}

const std::vector<Entry>& entries() {
  using C = PipelineConfig;
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back(number("tau_degrees", "paper", "dihedral saliency threshold", &C::model, &ModelConfig::tau_degrees));
    t.push_back(number("n_desire", "paper", "dense surface samples", &C::model, &ModelConfig::n_desire));
    t.push_back(number("n_uniform_anchors", "paper", "uniform anchors kept by FPS", &C::model, &ModelConfig::n_uniform_anchors));
    t.push_back(number("n_salient_anchors", "paper", "salient anchors kept by FPS", &C::model, &ModelConfig::n_salient_anchors));
    t.push_back(number("w_prior", "paper", "structure prior bias", &C::model, &ModelConfig::w_prior));
    t.push_back(number("rho_feature", "paper", "feature-distance decay", &C::train, &TrainConfig::rho_feature));
    t.push_back(number("w_struct", "paper", "structure loss weight", &C::train, &TrainConfig::w_struct));
    t.push_back(number("w_crossfield", "paper", "cross-field loss weight", &C::train, &TrainConfig::w_crossfield));
    t.push_back(number("lr", "paper", "Adam learning rate", &C::train, &TrainConfig::lr));
    t.push_back(number("pos_ratio", "paper", "positive share of edge queries", &C::train, &TrainConfig::pos_ratio));
    t.push_back(number("neg_ratio", "paper", "negative share of edge queries", &C::train, &TrainConfig::neg_ratio));
    t.push_back(number("steps", "paper", "training steps", &C::train, &TrainConfig::steps));
    t.push_back(number("batch_size", "paper", "meshes per step", &C::train, &TrainConfig::batch_size));
    t.push_back(number("query_cap", "paper", "edge and face queries per mesh and step", &C::train, &TrainConfig::query_cap));
    t.push_back(number("neighbor_cap", "desk", "local neighborhood size cap", &C::model, &ModelConfig::neighbor_cap));
    t.push_back(number("width", "desk", "token width", &C::model, &ModelConfig::width));
    t.push_back(number("heads", "desk", "attention heads", &C::model, &ModelConfig::heads));
    t.push_back(number("enc_self_layers", "desk", "encoder self-attention blocks", &C::model, &ModelConfig::enc_self_layers));
    t.push_back(number("dec_cross_layers", "desk", "decoder cross-attention blocks per head", &C::model, &ModelConfig::dec_cross_layers));
    t.push_back(number("ffn_mult", "desk", "feed-forward expansion", &C::model, &ModelConfig::ffn_mult));
    t.push_back(number("frequencies", "desk", "positional encoding octaves", &C::model, &ModelConfig::frequencies));
    t.push_back(number("beta1", "desk", "Adam first moment decay", &C::train, &TrainConfig::beta1));
    t.push_back(number("beta2", "desk", "Adam second moment decay", &C::train, &TrainConfig::beta2));
    t.push_back(number("adam_eps", "desk", "Adam epsilon", &C::train, &TrainConfig::adam_eps));
    t.push_back(number("checkpoint_every", "desk", "steps between checkpoints, 0 = off", &C::train, &TrainConfig::checkpoint_every));
    t.push_back({{"invert_feature_weight", "desk", "use exp(-rho d) instead of 1 - exp(-rho d)"},
                 [](const C& c) { return std::string(c.train.invert_feature_weight ? "true" : "false"); },
                 [](C& c, const std::string& s) { c.train.invert_feature_weight = parse_bool("invert_feature_weight", s); }});
    t.push_back(number("threshold", "desk", "structure probability threshold", &C::lines, &LineOptions::threshold));
    t.push_back(number("min_chain", "desk", "shortest isolated chain kept", &C::lines, &LineOptions::min_chain));
    t.push_back(number("max_split_depth", "desk", "bisections of non-disk patches", &C::partition, &PartitionOptions::max_split_depth));
    t.push_back(top("target_len", "desk", "quad edge length, <= 0 = 2% of bbox diagonal", &C::target_len));
    t.push_back(number("field_max_sweeps", "desk", "cross-field smoothing sweeps", &C::field, &FieldSolveOptions::max_sweeps));
    t.push_back(number("field_tol", "desk", "cross-field convergence tolerance", &C::field, &FieldSolveOptions::tol));
    t.push_back(top("chamfer_samples", "desk", "surface samples per side", &C::chamfer_samples));
    t.push_back(top("predict_chunk", "desk", "queries per inference chunk", &C::predict_chunk));
    t.push_back(top("seed", "desk", "global seed", &C::seed));
    return t;
  }();
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

constexpr const char* kHeader = "# lq-config 1";

}  // namespace

PipelineConfig::PipelineConfig() {
  train.steps = 30000;
  train.batch_size = 8;
  train.query_cap = 61440;
}

PipelineConfig PipelineConfig::desk() {
  PipelineConfig c;
  c.model.n_desire = 2048;
  c.model.n_uniform_anchors = 128;
  c.model.n_salient_anchors = 128;
  c.train.steps = 500;
  c.train.batch_size = 1;
  c.train.query_cap = 8192;
  return c;
}

void PipelineConfig::validate() const {
  try {
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  auto require = [](bool ok, const char* key, const char* range) {
    if (!ok) throw ConfigError(std::string("config: ") + key + " must be " + range);
  };
  require(lines.threshold >= 0.0 && lines.threshold <= 1.0, "threshold", "in [0, 1]");
  require(lines.min_chain >= 1, "min_chain", ">= 1");
  require(partition.max_split_depth >= 0 && partition.max_split_depth <= 32, "max_split_depth",
          "in [0, 32]");
  require(std::isfinite(target_len), "target_len", "finite");
  require(field.max_sweeps >= 1, "field_max_sweeps", ">= 1");
  require(field.tol > 0.0, "field_tol", "> 0");
  require(chamfer_samples >= 1, "chamfer_samples", ">= 1");
  require(predict_chunk >= 1, "predict_chunk", ">= 1");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries()) k.push_back(e.meta);
    return k;
  }();
  return keys;
}

std::string dump_config(const PipelineConfig& cfg) {
  std::string out = std::string(kHeader) + "\n";
  for (const auto& e : entries()) {
    out += e.meta.name + " = " + e.get(cfg) + "  # " + e.meta.provenance + ": " + e.meta.help + "\n";
  }
  return out;
}

PipelineConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kHeader) {
    throw ConfigError("config: missing '" + std::string(kHeader) + "' header");
  }
  PipelineConfig cfg;
  std::set<std::string> seen;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto it = std::find_if(entries().begin(), entries().end(),
                                 [&](const Entry& e) { return e.meta.name == key; });
    if (it == entries().end()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    it->set(cfg, value);
  }
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const std::filesystem::path& path, const PipelineConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("config: cannot write " + path.string());
  out << dump_config(cfg);
}

}  // namespace lq
