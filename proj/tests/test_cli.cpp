#include <algorithm>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "lq/config.hpp"
#include "lq/shapes.hpp"
#include "test_util.hpp"

using namespace lq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small model and short training so the CLI round trip stays fast.
fs::path tiny_config(const fs::path& dir) {
  const auto path = dir / "tiny.cfg";
  lq::testing::write_text(path,
                          "# lq-config 1\nwidth = 16\nfrequencies = 2\nn_desire = 64\n"
                          "n_uniform_anchors = 16\nn_salient_anchors = 16\nsteps = 2\n"
                          "batch_size = 1\nquery_cap = 64\nlr = 0.001\nchamfer_samples = 2000\n"
                          "target_len = 0.25\n");
  return path;
}

}  // namespace

TEST_CASE("usage errors exit with 2, help with 0") {
  CHECK(invoke({}).code == cli::kExitUsage);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
  CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
  CHECK(invoke({"run"}).code == cli::kExitUsage);
  CHECK(invoke({"synth", "--count", "0"}).code == cli::kExitUsage);

  const auto missing = invoke({"run", "/nonexistent/shape.obj"});
  CHECK(missing.code == cli::kExitUsage);
  CHECK(missing.err.find("/nonexistent/shape.obj") != std::string::npos);

  const auto dir = lq::testing::scratch_dir("cli_usage");
  lq::testing::write_text(dir / "cube.obj", lq::testing::kCubeText);
  const auto no_ckpt = invoke({"predict", (dir / "cube.obj").string()});
  CHECK(no_ckpt.code == cli::kExitUsage);
  CHECK(no_ckpt.err.find("oracle mode") != std::string::npos);

  lq::testing::write_text(dir / "bad.cfg", "# lq-config 1\nmystery = 1\n");
  const auto bad = invoke({"--config", (dir / "bad.cfg").string(), "field", (dir / "cube.obj").string()});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.find("mystery") != std::string::npos);

  lq::testing::write_text(dir / "broken.obj", "v 0 0 0\nf 1 2 3\n");
  CHECK(invoke({"--out", dir.string(), "run", (dir / "broken.obj").string()}).code == cli::kExitFailure);
}

TEST_CASE("run in oracle mode is deterministic") {
  const auto dir = lq::testing::scratch_dir("cli_run");
  lq::testing::write_text(dir / "cube.obj", lq::testing::kCubeText);
  const auto cfg = tiny_config(dir);
  const auto a = invoke({"--config", cfg.string(), "--out", (dir / "a").string(), "run",
                         (dir / "cube.obj").string()});
  REQUIRE(a.code == cli::kExitOk);
  CHECK(a.out.find("run: oracle V=98 F=96 I=8") != std::string::npos);
  CHECK(a.out.find("corrupt=false") != std::string::npos);
  const auto b = invoke({"--config", cfg.string(), "--out", (dir / "b").string(), "run",
                         (dir / "cube.obj").string()});
  CHECK(a.out.substr(0, a.out.find(" -> ")) == b.out.substr(0, b.out.find(" -> ")));
  for (const char* f : {"edge_prob.txt", "field.txt", "quads.obj", "remesh_report.txt"}) {
    CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
  }

  const auto m = invoke({"metrics", (dir / "cube.obj").string(), (dir / "cube.obj").string(),
                         "--samples", "5000"});
  REQUIRE(m.code == cli::kExitOk);
  CHECK(m.out.find("CD(1e-5)=0.0000 ") != std::string::npos);
  const auto q = invoke({"--out", (dir / "m").string(), "metrics", (dir / "cube.obj").string(),
                         (dir / "a" / "quads.obj").string(), "--samples", "5000"});
  REQUIRE(q.code == cli::kExitOk);
  CHECK(q.out.find("V=98 F=96 I=8") != std::string::npos);
  CHECK(fs::exists(dir / "m" / "metrics.csv"));
}

TEST_CASE("synth, sample, field, train, predict and remesh round trip") {
  const auto dir = lq::testing::scratch_dir("cli_flow");
  const auto cfg = tiny_config(dir);
  const std::string c = cfg.string();

  const auto s = invoke({"--config", c, "--seed", "3", "--out", (dir / "corpus").string(), "synth",
                         "--shape", "cube", "--shape", "l-bracket", "--count", "2", "--subdiv", "2"});
  REQUIRE(s.code == cli::kExitOk);
  const std::string manifest = slurp(dir / "corpus" / "manifest.txt");
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 3);  // header + 2 rows
  const std::string mesh = (dir / "corpus" / "cube_0000.obj").string();
  REQUIRE(fs::exists(mesh));
  CHECK(invoke({"synth", "--shape", "teapot"}).code == cli::kExitUsage);

  const auto smp = invoke({"--config", c, "--out", (dir / "pts").string(), "sample", mesh});
  REQUIRE(smp.code == cli::kExitOk);
  CHECK(fs::exists(dir / "pts" / "anchors.pts"));

  const auto fld = invoke({"--config", c, "--out", (dir / "fld").string(), "field", mesh});
  REQUIRE(fld.code == cli::kExitOk);
  CHECK(fld.out.find("index_sum=2") != std::string::npos);

  const auto t1 = invoke({"--config", c, "--out", (dir / "t1").string(), "train", "--manifest",
                          (dir / "corpus" / "manifest.txt").string()});
  REQUIRE(t1.code == cli::kExitOk);
  const auto t2 = invoke({"--config", c, "--out", (dir / "t2").string(), "train", "--manifest",
                          (dir / "corpus" / "manifest.txt").string()});
  auto hash_of = [](const std::string& s) { return s.substr(s.find("hash=")); };
  CHECK(hash_of(t1.out) == hash_of(t2.out));
  const std::string ckpt = (dir / "t1" / "model.ckpt").string();

  const auto p = invoke({"--config", c, "--out", (dir / "pred").string(), "predict", mesh,
                         "--checkpoint", ckpt});
  REQUIRE(p.code == cli::kExitOk);
  CHECK(fs::exists(dir / "pred" / "edge_prob.txt"));

  const auto r = invoke({"--config", c, "--out", (dir / "rm").string(), "remesh", mesh,
                         "--edge-prob", (dir / "pred" / "edge_prob.txt").string(), "--field",
                         (dir / "pred" / "field.txt").string()});
  CHECK(r.code == cli::kExitOk);
  CHECK(fs::exists(dir / "rm" / "quads.obj"));

  const auto oracle = invoke({"--config", c, "--out", (dir / "ro").string(), "remesh", mesh,
                              "--target-len", "0.5", "--threshold", "0.5", "--min-chain", "2"});
  CHECK(oracle.code == cli::kExitOk);
  CHECK(oracle.out.find("corrupt=false") != std::string::npos);
  CHECK(invoke({"remesh", mesh, "--threshold", "2"}).code == cli::kExitUsage);

  const auto mr = invoke({"--config", c, "--out", (dir / "mr").string(), "run", mesh,
                          "--checkpoint", ckpt});
  CHECK(mr.code == cli::kExitOk);
  CHECK(mr.out.find("run: model") != std::string::npos);
}
