#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "lq/config.hpp"
#include "lq/log.hpp"
#include "lq/metrics.hpp"
#include "lq/pipeline.hpp"
#include "lq/synth.hpp"
#include "lq/train.hpp"

namespace lq::cli {

namespace fs = std::filesystem;

namespace {

// Bad invocation or unreadable input: exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<double> threshold, target_len;
  std::optional<int> min_chain;
  std::string out = ".";
  bool desk = false;
  bool verbose = false;
};

PipelineConfig resolve_config(const Globals& g) {
  PipelineConfig cfg = g.config.empty() ? (g.desk ? PipelineConfig::desk() : PipelineConfig())
                                        : load_config(g.config);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.train.seed = *g.seed;
  }
  if (g.threshold) cfg.lines.threshold = *g.threshold;
  if (g.target_len) cfg.target_len = *g.target_len;
  if (g.min_chain) cfg.lines.min_chain = *g.min_chain;
  cfg.validate();
  return cfg;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

TriMesh read_mesh(const std::string& path) {
  require_file(path, "mesh");
  return load_mesh(path);
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

// Chamfer in display units of 1e-5.
std::string fmt_cd(double cd) {
  std::ostringstream s;
  s << std::fixed;
  s.precision(4);
  s << cd * 1e5;
  return s.str();
}

std::string metrics_summary(const MetricsReport& m) {
  return "V=" + std::to_string(m.v_count) + " F=" + std::to_string(m.f_count) +
         " I=" + std::to_string(m.singularities) + " CD(1e-5)=" + fmt_cd(m.chamfer) + " SJ=" + fmt(m.sj) +
         " corrupt=" + (m.corrupt ? "true" : "false");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structure-guided quad remeshing"};
  app.require_subcommand(1);
  Globals g;
  auto* cfg_opt = app.add_option("--config", g.config, "Pipeline config file (# lq-config 1)");
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--desk", g.desk, "Desk-scale preset instead of the published defaults")
      ->excludes(cfg_opt);
  app.add_flag("-v,--verbose", g.verbose, "Informational logging");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  std::vector<std::string> shape_names = {"cube"};
  CorpusSpec spec;
  synth->add_option("--shape", shape_names,
                    "Generators: cube, box-grid, cylinder, l-bracket, fused-boxes")
      ->capture_default_str();
  synth->add_option("--count", spec.count, "Number of shapes")->check(CLI::PositiveNumber);
  synth->add_option("--subdiv", spec.subdiv, "Grid resolution per box side")
      ->check(CLI::PositiveNumber);
  synth->add_option("--aspect-min", spec.aspect_min, "Smallest axis ratio");
  synth->add_option("--aspect-max", spec.aspect_max, "Largest axis ratio");

  // sample
  auto* sample = app.add_subcommand("sample", "Salient and uniform samples plus FPS anchors");
  std::string mesh_path;
  sample->add_option("mesh", mesh_path, "Input triangle mesh")->required();

  // field
  auto* field = app.add_subcommand("field", "Oracle cross-field aligned to salient edges");
  field->add_option("mesh", mesh_path, "Input triangle mesh")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train on a corpus manifest");
  std::string manifest;
  train_cmd->add_option("--manifest", manifest, "Corpus manifest")->required();

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Edge probabilities and field from a model");
  std::string checkpoint;
  predict_cmd->add_option("mesh", mesh_path, "Input triangle mesh")->required();
  predict_cmd->add_option("--checkpoint", checkpoint, "Trained model");

  // run
  auto* run_cmd = app.add_subcommand("run", "Full pipeline; oracle guidance without a checkpoint");
  run_cmd->add_option("mesh", mesh_path, "Input triangle mesh")->required();
  run_cmd->add_option("--checkpoint", checkpoint, "Trained model");

  // remesh
  auto* remesh_cmd = app.add_subcommand("remesh", "Quad remesh from given or oracle guidance");
  std::string probs_path, field_path;
  remesh_cmd->add_option("mesh", mesh_path, "Input triangle mesh")->required();
  remesh_cmd->add_option("--edge-prob", probs_path, "Edge probabilities (default: salient edges)");
  remesh_cmd->add_option("--field", field_path, "Cross-field (default: oracle field)");

  for (auto* cmd : {run_cmd, remesh_cmd}) {
    cmd->add_option("--threshold", g.threshold, "Structure probability threshold");
    cmd->add_option("--target-len", g.target_len, "Quad edge length (<= 0: 2% of bbox diagonal)");
    cmd->add_option("--min-chain", g.min_chain, "Shortest isolated chain kept");
  }

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "Compare a result mesh with its input");
  std::string reference, candidate;
  int samples = -1;
  metrics_cmd->add_option("reference", reference, "Input triangle mesh")->required();
  metrics_cmd->add_option("candidate", candidate, "Result mesh (quads for full metrics)")
      ->required();
  metrics_cmd->add_option("--samples", samples, "Chamfer samples per side")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  set_log_level(g.verbose ? LogLevel::kInfo : LogLevel::kWarn);

  try {
    const PipelineConfig cfg = resolve_config(g);
    const fs::path out_dir = g.out;

    if (synth->parsed()) {
      spec.generators.clear();
      for (const auto& n : shape_names) {
        const auto k = parse_shape_kind(n);
        if (!k) throw UsageError("unknown shape '" + n + "'");
        spec.generators.push_back(*k);
      }
      spec.seed = cfg.seed;
      spec.tau_degrees = cfg.model.tau_degrees;
      if (!(spec.aspect_min > 0.0 && spec.aspect_min <= spec.aspect_max)) {
        throw UsageError("aspect range must satisfy 0 < min <= max");
      }
      fs::create_directories(out_dir);
      const auto samples_out = generate_corpus(spec);
      const auto path = write_corpus(out_dir, samples_out);
      out << "synth: " << samples_out.size() << " shapes -> " << path.string() << '\n';
    } else if (sample->parsed()) {
      const TriMesh mesh = read_mesh(mesh_path);
      const MeshInputs in = prepare_inputs(mesh, cfg.model, cfg.seed);
      fs::create_directories(out_dir);
      write_pointset(out_dir / "uniform.pts", in.uniform_pool);
      write_pointset(out_dir / "salient.pts", in.salient_pool);
      write_pointset(out_dir / "anchors.pts", in.anchors.points);
      out << "sample: uniform=" << in.uniform_pool.size() << " salient=" << in.salient_pool.size()
          << " anchors=" << in.anchors.n_uniform << '+' << in.anchors.n_salient << " -> "
          << out_dir.string() << '\n';
    } else if (field->parsed()) {
      const TriMesh mesh = read_mesh(mesh_path);
      const SaliencyInfo sal = compute_saliency(mesh, cfg.model.tau_degrees);
      FieldSolveReport rep;
      const CrossField f =
          oracle_field(mesh, align_to_structure(mesh, sal.salient_edges), cfg.field, &rep);
      fs::create_directories(out_dir);
      save_field(out_dir / "field.txt", f);
      const auto sing = singularity_index(mesh, f);
      out << "field: faces=" << f.size() << " sweeps=" << rep.sweeps
          << " converged=" << (rep.converged ? "true" : "false")
          << " singular_vertices=" << sing.singular.size() << " index_sum=" << fmt(sing.raw_sum)
          << " -> " << (out_dir / "field.txt").string() << '\n';
    } else if (train_cmd->parsed()) {
      require_file(manifest, "manifest");
      TrainConfig tc = cfg.train;
      tc.checkpoint_dir = out_dir / "checkpoints";
      fs::create_directories(out_dir);
      const auto corpus = load_corpus(manifest, cfg.model, tc);
      const TrainResult r = train(corpus, cfg.model, tc);
      const fs::path ckpt = out_dir / "model.ckpt";
      save_checkpoint(ckpt, r.model);
      out << "train: meshes=" << corpus.size() << " steps=" << r.history.size()
          << " loss=" << fmt(r.history.front().total) << "->" << fmt(r.history.back().total)
          << " checkpoint=" << ckpt.string() << " hash=" << std::hex << file_hash(ckpt)
          << std::dec << '\n';
    } else if (predict_cmd->parsed()) {
      if (checkpoint.empty()) {
        throw UsageError(
            "predict needs --checkpoint; without a trained model use oracle mode: "
            "`run <mesh>` with no --checkpoint");
      }
      const TriMesh mesh = read_mesh(mesh_path);
      require_file(checkpoint, "checkpoint");
      Model model = load_checkpoint(checkpoint);
      const Guidance gd = model_guidance(mesh, model, cfg);
      fs::create_directories(out_dir);
      save_edge_probs(out_dir / "edge_prob.txt", gd.edge_prob);
      save_field(out_dir / "field.txt", gd.field);
      const auto structural = std::count_if(gd.edge_prob.begin(), gd.edge_prob.end(),
                                            [&](double p) { return p >= cfg.lines.threshold; });
      out << "predict: edges=" << gd.edge_prob.size() << " structural=" << structural
          << " faces=" << gd.field.size() << " -> " << out_dir.string() << '\n';
    } else if (run_cmd->parsed()) {
      const TriMesh mesh = read_mesh(mesh_path);
      std::optional<Model> model;
      if (!checkpoint.empty()) {
        require_file(checkpoint, "checkpoint");
        model = load_checkpoint(checkpoint);
      }
      const PipelineResult r = run_pipeline(mesh, cfg, model ? &*model : nullptr, out_dir);
      out << "run: " << (r.oracle_mode ? "oracle" : "model") << ' ' << metrics_summary(r.metrics)
          << " unmeshable=" << r.remesh.report.unmeshable.size() << " -> " << out_dir.string()
          << '\n';
    } else if (remesh_cmd->parsed()) {
      const TriMesh mesh = read_mesh(mesh_path);
      Guidance gd;
      if (probs_path.empty() || field_path.empty()) gd = oracle_guidance(mesh, cfg);
      if (!probs_path.empty()) {
        require_file(probs_path, "edge probabilities");
        gd.edge_prob = load_edge_probs(probs_path);
      }
      if (!field_path.empty()) {
        require_file(field_path, "field");
        gd.field = load_field(field_path);
      }
      const RemeshResult res = remesh(mesh, gd.edge_prob, gd.field, remesh_options(cfg));
      fs::create_directories(out_dir);
      save_polygons(out_dir / "quads.obj", to_polygons(res.quads));
      std::ofstream(out_dir / "remesh_report.txt", std::ios::binary)
          << format_remesh_report(res.report);
      out << "remesh: quads=" << res.quads.quads.size() << " vertices=" << res.quads.vertices.size()
          << " patches=" << res.report.patches << " unmeshable=" << res.report.unmeshable.size()
          << " corrupt=" << (res.report.corruption.corrupt ? "true" : "false") << " -> "
          << (out_dir / "quads.obj").string() << '\n';
    } else if (metrics_cmd->parsed()) {
      const TriMesh ref = read_mesh(reference);
      require_file(candidate, "candidate mesh");
      const PolygonSoup soup = load_polygons(candidate);
      MetricsOptions mo;
      mo.samples = samples > 0 ? samples : cfg.chamfer_samples;
      mo.seed = cfg.seed;
      const bool all_quads = !soup.polygons.empty() &&
                             std::all_of(soup.polygons.begin(), soup.polygons.end(),
                                         [](const auto& p) { return p.size() == 4; });
      if (all_quads) {
        const MetricsReport m = make_report(quad_mesh_from_polygons(soup), ref, {}, mo);
        fs::create_directories(out_dir);
        std::ofstream(out_dir / "metrics.csv", std::ios::binary)
            << metrics_csv_header(m) << '\n' << metrics_csv_row(m) << '\n';
        out << "metrics: " << metrics_summary(m) << '\n';
      } else {
        // Not a quad mesh: only the distance is meaningful.
        const double cd =
            chamfer(triangles_of(ref), triangles_of(load_mesh(candidate)), mo.samples, mo.seed);
        out << "metrics: CD(1e-5)=" << fmt_cd(cd) << " (not a quad mesh; I and SJ skipped)\n";
      }
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PipelineError& e) {
    err << "error: stage " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace lq::cli
