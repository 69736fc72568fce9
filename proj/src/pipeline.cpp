#include "lq/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

#include "lq/log.hpp"

namespace lq {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs `fn` as stage `name`, recording its time and wrapping failures.
template <typename Fn>
auto timed(const char* name, std::vector<StageTime>& times, Fn&& fn) {
  const auto t0 = Clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      times.push_back({name, seconds_since(t0)});
    } else {
      auto r = fn();
      times.push_back({name, seconds_since(t0)});
      return r;
    }
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

RemeshOptions remesh_options(const PipelineConfig& cfg) {
  RemeshOptions o;
  o.lines = cfg.lines;
  o.partition = cfg.partition;
  o.target_len = cfg.target_len;
  return o;
}

Guidance oracle_guidance(const TriMesh& mesh, const PipelineConfig& cfg) {
  const SaliencyInfo sal = compute_saliency(mesh, cfg.model.tau_degrees);
  Guidance g;
  g.edge_prob.assign(mesh.num_edges(), 0.0);
  for (int e : sal.salient_edges) g.edge_prob[e] = 1.0;
  g.field = oracle_field(mesh, align_to_structure(mesh, sal.salient_edges), cfg.field);
  return g;
}

Guidance model_guidance(const TriMesh& mesh, Model& model, const PipelineConfig& cfg) {
  Prediction p = predict(mesh, model, cfg.seed, cfg.predict_chunk);
  if (!p.decode_failures.empty()) {
    log_warn(std::to_string(p.decode_failures.size()) +
             " faces have no decodable field direction");
  }
  return {std::move(p.edge_prob), std::move(p.field)};
}

PipelineResult run_pipeline(const TriMesh& mesh, const PipelineConfig& cfg, Model* model,
                            const std::optional<std::filesystem::path>& out_dir) {
  cfg.validate();
  if (out_dir) std::filesystem::create_directories(*out_dir);
  PipelineResult r;
  r.oracle_mode = model == nullptr;
  std::vector<StageTime> times;

  r.guidance = timed(model ? "predict" : "oracle", times, [&] {
    Guidance g = model ? model_guidance(mesh, *model, cfg) : oracle_guidance(mesh, cfg);
    if (out_dir) {
      save_edge_probs(*out_dir / "edge_prob.txt", g.edge_prob);
      save_field(*out_dir / "field.txt", g.field);
    }
    return g;
  });

  r.remesh = timed("remesh", times, [&] {
    RemeshResult res = remesh(mesh, r.guidance.edge_prob, r.guidance.field, remesh_options(cfg));
    if (out_dir) {
      save_polygons(*out_dir / "quads.obj", to_polygons(res.quads));
      write_text(*out_dir / "remesh_report.txt", format_remesh_report(res.report));
    }
    return res;
  });
  for (const auto& u : r.remesh.report.unmeshable) {
    log_warn("patch " + std::to_string(u.patch) + " (" + std::to_string(u.faces) +
             " faces) left unmeshed: " + u.reason);
  }

  const auto t0 = Clock::now();
  try {
    MetricsOptions mo;
    mo.samples = cfg.chamfer_samples;
    mo.seed = cfg.seed;
    r.metrics = make_report(r.remesh.quads, mesh, times, mo);
  } catch (const std::exception& e) {
    throw PipelineError("metrics", e.what());
  }
  r.metrics.runtime.push_back({"metrics", seconds_since(t0)});
  if (out_dir) {
    try {
      write_text(*out_dir / "metrics.csv",
                 metrics_csv_header(r.metrics) + "\n" + metrics_csv_row(r.metrics) + "\n");
    } catch (const std::exception& e) {
      throw PipelineError("metrics", e.what());
    }
  }
  return r;
}

void save_edge_probs(const std::filesystem::path& path, const std::vector<double>& probs) {
  std::string out = "# lq-edge-prob 1 edges=" + std::to_string(probs.size()) + "\n";
  char buf[64];
  for (double p : probs) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), p);
    out.append(buf, res.ptr);
    out.push_back('\n');
  }
  write_text(path, out);
}

std::vector<double> load_edge_probs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# lq-edge-prob 1 edges=", 0) != 0) {
    throw std::runtime_error(path.string() + ": missing edge probability header");
  }
  const size_t n = std::stoul(line.substr(line.find('=') + 1));
  std::vector<double> probs;
  probs.reserve(n);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double p = 0.0;
    const auto res = std::from_chars(line.data(), line.data() + line.size(), p);
    if (res.ec != std::errc() || res.ptr != line.data() + line.size()) {
      throw std::runtime_error(path.string() + ": bad probability '" + line + "'");
    }
    probs.push_back(p);
  }
  if (probs.size() != n) throw std::runtime_error(path.string() + ": edge count mismatch");
  return probs;
}

}  // namespace lq
