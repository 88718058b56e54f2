#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "doctest.h"
#include "fixtures.hpp"
#include "trajmix/io/config.hpp"
#include "trajmix/io/files.hpp"

using namespace trajmix;
using namespace trajmix::io;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("trajmix_test_" + name)).string();
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) {
    ++n;
  }
  return n;
}

TrajectorySample sample(std::size_t n, double dt, double p, std::size_t k, Rng& rng) {
  TrajectorySample s;
  s.trajectory.dt = dt;
  for (std::size_t i = 0; i < n; ++i) {
    s.trajectory.points.emplace_back(rng.normal(0, 30), rng.normal(0, 30), rng.uniform(-3, 3));
  }
  s.probability = p;
  s.mixture_index = k;
  return s;
}

}  // namespace

TEST_CASE("empty config file gives the table defaults") {
  const auto path = temp_path("empty.json");
  write_text_file(path, "");
  const RunConfig c = load_config(path);
  CHECK(c.model.causal.d_model == 128);
  CHECK(c.model.scene.d_model == 128);
  CHECK(c.model.causal.heads == 8);
  CHECK(c.model.scene.local_layers == 6);
  CHECK(c.model.scene.global_layers == 6);
  CHECK(c.model.causal.layers == 6);
  CHECK(c.model.head.mixtures == 6);
  CHECK(c.model.head.latent_dim == 16);
  CHECK(c.model.head.future_steps == 15);
  CHECK(c.model.causal.causal_len == 15);
  CHECK(c.model.causal.interval == 2);
  CHECK(c.sampling.n_samples == 6);
  CHECK(c.sampling.d_min == doctest::Approx(1.4));
  CHECK(c.sector.r_max == doctest::Approx(10.0));
  CHECK(c.sector.theta_max == doctest::Approx(kPi / 4));
  CHECK(c.mpc.dynamics.dt == doctest::Approx(0.1));
  CHECK(c.mpc.dynamics.wheelbase == doctest::Approx(3.089));
  CHECK(to_json(c) == to_json(RunConfig{}));
  std::remove(path.c_str());
}

TEST_CASE("config errors are distinct") {
  CHECK_THROWS_AS(load_config(temp_path("does_not_exist.json")), ConfigFileError);
  const auto path = temp_path("bad.json");
  write_text_file(path, "{\"model\": ");
  CHECK_THROWS_AS(load_config(path), ConfigParseError);
  write_text_file(path, "{\"model\": {\"mixtures\": 0}}");
  CHECK_THROWS_AS(load_config(path), ConfigValueError);
  write_text_file(path, "{\"model\": {\"mixturez\": 3}}");
  CHECK_THROWS_AS(load_config(path), ConfigValueError);
  write_text_file(path, "{\"colour\": 1}");
  CHECK_THROWS_AS(load_config(path), ConfigValueError);
  write_text_file(path, "{\"train\": {\"batch_size\": \"big\"}}");
  CHECK_THROWS_AS(load_config(path), ConfigValueError);
  std::remove(path.c_str());
}

TEST_CASE("config round trip is the identity") {
  RunConfig c;
  c.seed = 77;
  c.model.input = training::FrameInput::kFeatures;
  c.model.feature_dim = 32;
  c.model.head.mixtures = 4;
  c.model.dropout = 0.0;
  c.sampling.n_samples = 4;
  c.sector.r_max = 3.5;
  c.mpc.weights.jerk = 0.02;
  c.train.iterations = 12;
  c.train.loss_target = training::LossTarget::kSmoothed;
  c.ring.rollouts = 3;
  c.train = c.train_config();
  const auto path = temp_path("roundtrip.json");
  save_config(c, path);
  const RunConfig back = load_config(path);
  CHECK(to_json(back) == to_json(c));
  save_config(back, path);
  CHECK(to_json(load_config(path)) == to_json(c));
  std::remove(path.c_str());
}

TEST_CASE("trajectory csv shape") {
  std::ostringstream empty;
  write_trajectory_csv(empty, {});
  CHECK(empty.str() == "sample_id,mixture,probability,refined,t,x,y,yaw\n");

  Rng rng(4);
  std::ostringstream two;
  write_trajectory_csv(two, {sample(2, 1.0, 0.5, 1, rng)});
  CHECK(count(two.str(), "\n") == 3);
}

TEST_CASE("trajectory csv round trip") {
  Rng rng(9);
  std::vector<TrajectorySample> samples;
  for (std::size_t i = 0; i < 5; ++i) samples.push_back(sample(1 + i, 0.1, 0.1 * i + 0.05, i, rng));
  samples[2].refined = true;
  std::stringstream ss;
  write_trajectory_csv(ss, samples);
  const auto back = read_trajectory_csv(ss);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& a = samples[i];
    const auto& b = back[i].sample;
    CHECK_FALSE(back[i].has_start);
    CHECK(b.mixture_index == a.mixture_index);
    CHECK(b.refined == a.refined);
    CHECK(std::abs(b.probability - a.probability) < 1e-10);
    CHECK(std::abs(b.trajectory.dt - a.trajectory.dt) < 1e-10);
    REQUIRE(b.trajectory.size() == a.trajectory.size());
    for (std::size_t t = 0; t < a.trajectory.size(); ++t) {
      CHECK(std::abs(b.trajectory.points[t].x - a.trajectory.points[t].x) < 1e-10);
      CHECK(std::abs(b.trajectory.points[t].y - a.trajectory.points[t].y) < 1e-10);
      CHECK(std::abs(b.trajectory.points[t].yaw - a.trajectory.points[t].yaw) < 1e-10);
    }
  }
}

TEST_CASE("trajectory csv start rows and malformed input") {
  std::istringstream in(
      "sample_id,mixture,probability,refined,t,x,y,yaw\n"
      "0,0,1,0,0,1,2,0.5\n"
      "0,0,1,0,0.5,3,4,0\n"
      "0,0,1,0,1,5,6,0\n");
  const auto back = read_trajectory_csv(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0].has_start);
  CHECK(back[0].start == Pose2D(1, 2, 0.5));
  CHECK(back[0].sample.trajectory.size() == 2);
  CHECK(back[0].sample.trajectory.dt == doctest::Approx(0.5));

  std::istringstream bad_header("id,x\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad_header), FormatError);
  std::istringstream bad_number(
      "sample_id,mixture,probability,refined,t,x,y,yaw\n0,0,1,0,1,abc,0,0\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad_number), FormatError);
  std::istringstream short_row("sample_id,mixture,probability,refined,t,x,y,yaw\n0,0,1\n");
  CHECK_THROWS_AS(read_trajectory_csv(short_row), FormatError);
  CHECK_THROWS_AS(read_trajectory_csv_file(temp_path("missing.csv")), FileError);
}

TEST_CASE("svg of an empty scene is a minimal document") {
  const std::string svg = render_svg({}, {}, {});
  CHECK(svg.rfind("<svg ", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count(svg, "<circle") == 0);
  CHECK(count(svg, "<polyline") == 0);
}

TEST_CASE("svg is deterministic and counts elements") {
  PlotScene scene;
  scene.circles.push_back({{0.0, 0.0}, 50.0});
  Rng rng(3);
  const std::vector<TrajectorySample> samples{sample(10, 1.0, 0.7, 0, rng)};
  const std::string a = render_svg(scene, samples, {});
  const std::string b = render_svg(scene, samples, {});
  CHECK(a == b);
  CHECK(count(a, "<circle") == 1);
  CHECK(count(a, "<polyline") == 1);
  CHECK(count(a, "<") == 4);  // svg, circle, polyline, closing tag

  Trajectory executed = samples[0].trajectory;
  const std::string c = render_svg(scene, samples, executed);
  CHECK(count(c, "<polyline") == 2);

  const auto path = temp_path("plot.svg");
  emit_svg_plot(path, scene, samples, executed);
  CHECK(read_text_file(path) == c);
  std::remove(path.c_str());
}

TEST_CASE("scene json round trip") {
  Rng rng(5);
  auto s = fixtures::random_scene(rng, 2, 3, 1, 6);
  s.agents[1].mask[0] = false;
  const auto text = scene_to_json(s).dump();
  const auto back = scene_from_json(nlohmann::json::parse(text));
  CHECK(scene_to_json(back) == scene_to_json(s));
  CHECK(back.agents.size() == 2);
  CHECK_FALSE(back.agents[1].mask[0]);

  auto j = scene_to_json(s);
  j["lanes"][0]["values"][0].push_back(1.0);
  CHECK_THROWS_AS(scene_from_json(j), FormatError);
  auto k = scene_to_json(s);
  k["extra"] = 1;
  CHECK_THROWS_AS(scene_from_json(k), FormatError);
}

TEST_CASE("ring data json round trip") {
  sim::RingScenario sc;
  sc.radius = 30.0;
  Rng rng(2);
  const auto data = sim::generate_ring_data(sc, 4, 13, 10, rng);
  sim::RingScenario back_sc;
  const auto back = ring_data_from_json(ring_data_to_json(sc, data), &back_sc);
  CHECK(back_sc.radius == sc.radius);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].history == data[i].history);
    CHECK(back[i].future.points == data[i].future.points);
    CHECK(back[i].future.dt == data[i].future.dt);
  }
}

TEST_CASE("metrics json fields") {
  sim::MetricsReport r;
  r.offroad_rate = 0.25;
  r.n_rollouts = 4;
  const auto j = metrics_to_json(r);
  CHECK(j.at("offroad_rate").get<double>() == 0.25);
  CHECK(j.at("n_rollouts").get<std::size_t>() == 4);
  CHECK(j.contains("l2_error"));
  CHECK(j.contains("discomfort_rate"));
}
