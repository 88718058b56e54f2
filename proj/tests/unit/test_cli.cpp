#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "trajmix/io/cli.hpp"
#include "trajmix/io/config.hpp"
#include "trajmix/io/files.hpp"

using namespace trajmix;
using namespace trajmix::io;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "trajmix");
  std::ostringstream out, err;
  Run r;
  r.code = run_command(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("trajmix_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Small ring config so the pipeline runs in about a second.
std::string write_small_config(const fs::path& dir) {
  RunConfig c;
  c.seed = 11;
  c.model.input = training::FrameInput::kFeatures;
  c.model.feature_dim = 32;
  c.model.causal.d_model = c.model.head.d_model = c.model.scene.d_model = 16;
  c.model.causal.heads = c.model.scene.heads = 2;
  c.model.causal.ffn_dim = c.model.scene.ffn_dim = 32;
  c.model.causal.layers = 1;
  c.model.causal.causal_len = 3;
  c.model.causal.interval = 1;
  c.model.head.mixtures = 3;
  c.model.head.future_steps = 10;
  c.model.head.latent_dim = 4;
  c.model.dropout = 0.0;
  c.sampling.n_samples = 3;
  c.train.batch_size = 4;
  c.ring.episodes = 16;
  c.ring.rollouts = 2;
  c.ring.rollout_steps = 5;
  const std::string path = (dir / "config.json").string();
  save_config(c, path);
  return path;
}

std::vector<std::string> pipeline(const fs::path& dir, const std::string& config) {
  const std::string d = dir.string();
  REQUIRE(run({"generate-data", "--config", config, "--out", d + "/data.json"}).code == 0);
  REQUIRE(run({"train", "--config", config, "--data", d + "/data.json", "--iterations", "10",
               "--out", d + "/run"})
              .code == 0);
  REQUIRE(run({"rollout", "--checkpoint", d + "/run", "--out", d + "/roll"}).code == 0);
  const Run e = run({"eval", "--config", config, "--pred", d + "/roll/rollouts.csv", "--gt",
                     d + "/roll/ground_truth.csv", "--out", d + "/metrics.json"});
  REQUIRE(e.code == 0);
  std::vector<std::string> files;
  for (const char* f : {"data.json", "run/model.ckpt", "run/loss.csv", "run/config.json",
                        "roll/rollouts.csv", "roll/ground_truth.csv", "roll/rollouts.svg",
                        "metrics.json"}) {
    files.push_back(read_text_file((dir / f).string()));
  }
  return files;
}

}  // namespace

TEST_CASE("pipeline is deterministic under a fixed seed") {
  const fs::path base = fresh_dir("pipeline");
  const std::string config = write_small_config(base);
  const auto a = pipeline(base / "a", config);
  const auto b = pipeline(base / "b", config);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  const auto m = nlohmann::json::parse(a.back());
  CHECK(m.at("n_rollouts").get<std::size_t>() == 2);

  const std::string d = (base / "a").string();
  const Run same = run({"eval", "--pred", d + "/roll/rollouts.csv", "--gt", d + "/roll/rollouts.csv"});
  REQUIRE(same.code == 0);
  CHECK(nlohmann::json::parse(same.out).at("l2_error").get<double>() == 0.0);

  const Run pred = run({"predict", "--checkpoint", d + "/run", "--input", d + "/data.json", "--out",
                        d + "/pred.csv"});
  REQUIRE(pred.code == 0);
  CHECK(read_trajectory_csv_file(d + "/pred.csv").size() == 3);

  const Run other_seed = run({"generate-data", "--config", config, "--seed", "12", "--out",
                              d + "/data2.json"});
  REQUIRE(other_seed.code == 0);
  CHECK(read_text_file(d + "/data2.json") != a.front());
  fs::remove_all(base);
}

TEST_CASE("smooth on a zero-control reference reports zero cost") {
  const fs::path dir = fresh_dir("smooth");
  std::string csv = "sample_id,mixture,probability,refined,t,x,y,yaw\n0,0,1,0,0,2,1,0.5\n";
  for (int i = 1; i <= 10; ++i) {
    std::ostringstream row;
    row.precision(17);
    row << "0,0,1,0," << i << ',' << 2 + i * std::cos(0.5) << ',' << 1 + i * std::sin(0.5)
        << ",0.5\n";
    csv += row.str();
  }
  write_text_file((dir / "ref.csv").string(), csv);
  const Run r = run({"smooth", "--input", (dir / "ref.csv").string(), "--out",
                     (dir / "out.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out).at("cost").get<double>() < 1e-8);
  const auto out = read_trajectory_csv_file((dir / "out.csv").string());
  REQUIRE(out.size() == 1);
  CHECK(out[0].sample.trajectory.size() == 10);
  CHECK(out[0].sample.refined);
  fs::remove_all(dir);
}

TEST_CASE("failures exit nonzero with one diagnostic line") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"bogus"},
           {},
           {"eval", "--pred", "/nonexistent/a.csv", "--gt", "/nonexistent/b.csv"},
           {"train", "--data", "/nonexistent/data.json", "--out", "/tmp/x"},
           {"rollout", "--checkpoint", "/nonexistent", "--out", "/tmp/x"},
           {"generate-data"},
           {"smooth", "--input", "/nonexistent.csv", "--out", "/tmp/x.csv"},
           {"generate-data", "--config", "/nonexistent.json", "--out", "/tmp/x.json"}}) {
    const Run r = run(args);
    CHECK(r.code != 0);
    CHECK(r.err.rfind("trajmix: ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
}

TEST_CASE("config path from the environment") {
  const fs::path dir = fresh_dir("env");
  write_text_file((dir / "bad.json").string(), "{\"model\": {\"mixtures\": 0}}");
  setenv(kConfigEnv, (dir / "bad.json").string().c_str(), 1);
  const Run r = run({"generate-data", "--out", (dir / "d.json").string()});
  unsetenv(kConfigEnv);
  CHECK(r.code != 0);
  CHECK(r.err.find("mixtures") != std::string::npos);
  fs::remove_all(dir);
}
