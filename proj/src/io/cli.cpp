#include "trajmix/io/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "trajmix/core/errors.hpp"
#include "trajmix/io/config.hpp"
#include "trajmix/io/files.hpp"
#include "trajmix/mpc/smoother.hpp"
#include "trajmix/sim/closed_loop.hpp"

namespace trajmix::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kCheckpointFile = "model.ckpt";
constexpr const char* kConfigFile = "config.json";
constexpr const char* kLossFile = "loss.csv";

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed, overrides the config");
  cmd->add_option("--config", c.config, std::string("JSON config file (default: $") + kConfigEnv + ")");
  cmd->add_option("--out", c.out, "Output path");
}

RunConfig resolve_config(const Common& c, const std::string& fallback = {}) {
  std::string path = c.config;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnv); env && *env) path = env;
  }
  if (path.empty()) path = fallback;
  RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
  if (c.seed) cfg.seed = *c.seed;
  cfg.train = cfg.train_config();
  return cfg;
}

const std::string& require_out(const Common& c) {
  if (c.out.empty()) throw std::invalid_argument("--out is required");
  return c.out;
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError("cannot parse " + path + ": " + e.what());
  }
}

void require_feature_model(const RunConfig& cfg) {
  if (cfg.model.input != training::FrameInput::kFeatures ||
      cfg.model.feature_dim != sim::kRingFeatureDim) {
    throw ConfigValueError("ring data needs model.input \"features\" with feature_dim " +
                           std::to_string(sim::kRingFeatureDim));
  }
}

struct Loaded {
  RunConfig cfg;
  tensor::ParameterStore store;
  std::unique_ptr<training::TrajectoryModel> model;
};

// Model settings always come from the checkpoint; other settings from --config if given.
Loaded load_checkpoint(const std::string& dir, const Common& c) {
  const std::string saved = (fs::path(dir) / kConfigFile).string();
  const RunConfig ckpt_cfg = load_config(saved);
  Loaded l;
  l.cfg = resolve_config(c, saved);
  l.cfg.model = ckpt_cfg.model;
  l.cfg.validate();
  const std::string ckpt = (fs::path(dir) / kCheckpointFile).string();
  if (!fs::exists(ckpt)) throw FileError("missing checkpoint " + ckpt);
  tensor::ParameterStore loaded = tensor::ParameterStore::load_file(ckpt);
  Rng rng(0);
  l.model = std::make_unique<training::TrajectoryModel>(
      training::TrajectoryModel::create(l.store, l.cfg.model, rng));
  l.store.assign_values(loaded);
  return l;
}

void run_generate(const Common& c, std::optional<std::size_t> episodes, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  cfg.validate();
  const auto& sc = cfg.ring.scenario;
  const std::size_t context =
      sim::ring_context_frames(sc, cfg.model.causal.causal_len, cfg.model.causal.interval);
  Rng rng = Rng::derive(cfg.seed, kDataStream);
  const auto data = sim::generate_ring_data(sc, episodes.value_or(cfg.ring.episodes), context,
                                            cfg.model.head.future_steps, rng);
  write_text_file(require_out(c), ring_data_to_json(sc, data).dump() + "\n");
  out << "wrote " << data.size() << " episodes to " << c.out << '\n';
}

void run_train(const Common& c, const std::string& data_path, std::optional<std::size_t> iterations,
               std::ostream& out) {
  RunConfig cfg = resolve_config(c);
  require_feature_model(cfg);
  sim::RingScenario sc;
  auto samples = ring_data_from_json(read_json_file(data_path), &sc);
  cfg.ring.scenario = sc;
  if (iterations) cfg.train.iterations = *iterations;
  cfg.validate();
  const sim::RingDataset data(sc, std::move(samples), cfg.model.causal.causal_len,
                              cfg.model.causal.interval);
  tensor::ParameterStore store;
  Rng init = Rng::derive(cfg.seed, kInitStream);
  const auto model = training::TrajectoryModel::create(store, cfg.model, init);
  const auto result = training::train(model, store, data, cfg.train_config());

  const fs::path dir(require_out(c));
  fs::create_directories(dir);
  store.save_file((dir / kCheckpointFile).string());
  save_config(cfg, (dir / kConfigFile).string());
  training::write_loss_csv_file((dir / kLossFile).string(), result.history);
  const auto& last = result.history.back().loss;
  out << "trained " << result.history.size() << " iterations, final loss " << last.total
      << ", checkpoint in " << dir.string() << '\n';
}

// Window, anchor pose and output dt for a predict input file.
struct PredictInput {
  training::Window window;
  Pose2D anchor;
  double dt = 1.0;
};

PredictInput predict_input(const json& j, const RunConfig& cfg, std::size_t index) {
  PredictInput p;
  if (j.is_object() && j.contains("samples")) {
    require_feature_model(cfg);
    sim::RingScenario sc;
    const auto data = ring_data_from_json(j, &sc);
    if (index >= data.size()) throw std::out_of_range("--index past the last episode");
    const auto& history = data[index].history;
    const std::size_t need =
        sim::ring_context_frames(sc, cfg.model.causal.causal_len, cfg.model.causal.interval);
    if (history.size() < need) {
      throw FormatError("episode has " + std::to_string(history.size()) + " poses, need " +
                        std::to_string(need));
    }
    const std::vector<Pose2D> context(history.end() - static_cast<std::ptrdiff_t>(need),
                                      history.end());
    p.window = sim::ring_window(context, sc, cfg.model.causal.causal_len, cfg.model.causal.interval);
    p.anchor = context.back();
    p.dt = sc.dt();
    return p;
  }
  if (cfg.model.input != training::FrameInput::kScene) {
    throw ConfigValueError("scene input needs model.input \"scene\"");
  }
  if (j.is_object() && j.contains("frames")) {
    for (const json& f : j.at("frames")) p.window.scenes.push_back(scene_from_json(f));
  } else {
    p.window.scenes.push_back(scene_from_json(j));
  }
  if (p.window.scenes.empty()) throw FormatError("no scene frames");
  return p;
}

void run_predict(const Common& c, const std::string& ckpt, const std::string& input,
                 std::size_t index, std::ostream& out) {
  const Loaded l = load_checkpoint(ckpt, c);
  const PredictInput in = predict_input(read_json_file(input), l.cfg, index);
  const auto gmm = l.model->predict(l.store, in.window);
  Rng rng = Rng::derive(l.cfg.seed, kPredictStream);
  auto samples = constraints::nms_sample(gmm, l.cfg.sampling, rng, in.dt);
  for (auto& s : samples) {
    s.trajectory = transform_to_world(
        in.anchor, constraints::sector_project_trajectory(s.trajectory, Pose2D(), l.cfg.sector));
  }
  write_trajectory_csv_file(require_out(c), samples);
  out << "wrote " << samples.size() << " samples to " << c.out << '\n';
}

void run_smooth(const Common& c, const std::string& input, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  cfg.validate();
  const auto refs = read_trajectory_csv_file(input);
  const auto sm = cfg.mpc.smoothing();
  std::vector<TrajectorySample> smoothed;
  json report = json::array();
  double total = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& r = refs[i];
    const Trajectory& ref = r.sample.trajectory;
    if (ref.empty()) throw FormatError("sample " + std::to_string(i) + " has no points");
    // Start state from the first difference between the start pose and the first point.
    VehicleState x0;
    x0.pose = r.start;
    const Pose2D first = pose_world_to_ego(r.start, ref.points.front());
    x0.vx = first.x / ref.dt;
    x0.vy = first.y / ref.dt;
    x0.yaw_rate = first.yaw / ref.dt;
    const auto res = mpc::smooth(ref, x0, sm.weights, sm.bounds, sm.dynamics, sm.options);
    TrajectorySample s = r.sample;
    s.refined = true;
    s.trajectory = mpc::resample(res.trajectory, r.start, ref.dt, ref.size());
    smoothed.push_back(std::move(s));
    report.push_back({{"sample", i},
                      {"cost", res.cost},
                      {"initial_cost", res.initial_cost},
                      {"gradient_norm", res.gradient_norm},
                      {"converged", res.converged},
                      {"iterations", res.iterations}});
    total += res.cost;
  }
  write_trajectory_csv_file(require_out(c), smoothed);
  out << json{{"cost", total}, {"samples", report}}.dump() << '\n';
}

void run_rollout(const Common& c, const std::string& ckpt, std::optional<std::size_t> n,
                 std::optional<std::size_t> steps, std::ostream& out) {
  Loaded l = load_checkpoint(ckpt, c);
  if (n) l.cfg.ring.rollouts = *n;
  if (steps) l.cfg.ring.rollout_steps = *steps;
  const auto& sc = l.cfg.ring.scenario;
  const auto rollouts = sim::run_rollouts(sim::model_predictor(*l.model, l.store), sc,
                                          l.cfg.closed_loop_config(), l.cfg.ring.rollouts, l.cfg.seed);
  std::vector<TrajectorySample> exec, gt;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    TrajectorySample e;
    e.trajectory = rollouts[i].executed;
    e.probability = 1.0;
    e.refined = l.cfg.closed_loop_config().smooth;
    exec.push_back(e);
    TrajectorySample g;
    g.trajectory = rollouts[i].ground_truth;
    g.probability = 1.0;
    gt.push_back(g);
  }
  const fs::path dir(require_out(c));
  fs::create_directories(dir);
  write_trajectory_csv_file((dir / "rollouts.csv").string(), exec);
  write_trajectory_csv_file((dir / "ground_truth.csv").string(), gt);
  PlotScene scene;
  scene.circles.push_back({{0.0, 0.0}, sc.radius});
  const std::vector<TrajectorySample> others(exec.size() > 1 ? exec.begin() + 1 : exec.end(),
                                             exec.end());
  emit_svg_plot((dir / "rollouts.svg").string(), scene, others,
                exec.empty() ? Trajectory{} : exec.front().trajectory);
  out << "wrote " << rollouts.size() << " rollouts to " << dir.string() << '\n';
}

void run_eval(const Common& c, const std::string& pred, const std::string& gt, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const auto p = read_trajectory_csv_file(pred);
  const auto g = read_trajectory_csv_file(gt);
  if (p.size() != g.size()) {
    throw FormatError("prediction has " + std::to_string(p.size()) + " trajectories, ground truth " +
                      std::to_string(g.size()));
  }
  std::vector<Trajectory> pt, gtt;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pt.push_back(p[i].sample.trajectory);
    gtt.push_back(g[i].sample.trajectory);
  }
  const auto report = sim::evaluate(pt, gtt, sim::CirclePath{{0.0, 0.0}, cfg.ring.scenario.radius});
  const std::string text = metrics_to_json(report).dump(2) + "\n";
  if (!c.out.empty()) write_text_file(c.out, text);
  out << text;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Multimodal trajectory prediction with a causal transformer, mixture head and MPC smoothing",
               "trajmix");
  app.require_subcommand(1);

  Common common;
  std::optional<std::size_t> episodes, iterations, n_rollouts, n_steps;
  std::string data, checkpoint, input, pred, gt;
  std::size_t index = 0;

  auto* gen = app.add_subcommand("generate-data", "Write a synthetic ring dataset as JSON");
  add_common(gen, common);
  gen->add_option("--episodes", episodes, "Number of episodes (default from config)");

  auto* train = app.add_subcommand("train", "Train on a ring dataset; writes checkpoint, config and loss CSV");
  add_common(train, common);
  train->add_option("--data", data, "Ring dataset JSON")->required();
  train->add_option("--iterations", iterations, "Override train.iterations");

  auto* predict = app.add_subcommand("predict", "Sample trajectories for a scene or ring episode");
  add_common(predict, common);
  predict->add_option("--checkpoint", checkpoint, "Directory written by train")->required();
  predict->add_option("--input", input, "Scene JSON or ring dataset JSON")->required();
  predict->add_option("--index", index, "Episode index for ring input");

  auto* smooth = app.add_subcommand("smooth", "Smooth reference trajectories from a CSV");
  add_common(smooth, common);
  smooth->add_option("--input", input, "Reference trajectory CSV")->required();

  auto* rollout = app.add_subcommand("rollout", "Closed-loop ring rollouts; writes CSV and SVG");
  add_common(rollout, common);
  rollout->add_option("--checkpoint", checkpoint, "Directory written by train")->required();
  rollout->add_option("--rollouts", n_rollouts, "Override ring.rollouts");
  rollout->add_option("--steps", n_steps, "Override ring.rollout_steps");

  auto* eval = app.add_subcommand("eval", "Metrics of executed trajectories against ground truth");
  add_common(eval, common);
  eval->add_option("--pred", pred, "Executed trajectory CSV")->required();
  eval->add_option("--gt", gt, "Ground-truth trajectory CSV")->required();

  if (args.size() > 1 && !args[1].empty() && args[1][0] != '-' &&
      app.get_subcommand_no_throw(args[1]) == nullptr) {
    err << "trajmix: unknown subcommand '" << args[1] << "'\n";
    return 2;
  }
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "trajmix: " << e.what() << '\n';
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*gen) {
      run_generate(common, episodes, out);
    } else if (*train) {
      run_train(common, data, iterations, out);
    } else if (*predict) {
      run_predict(common, checkpoint, input, index, out);
    } else if (*smooth) {
      run_smooth(common, input, out);
    } else if (*rollout) {
      run_rollout(common, checkpoint, n_rollouts, n_steps, out);
    } else if (*eval) {
      run_eval(common, pred, gt, out);
    }
  } catch (const std::exception& e) {
    err << "trajmix: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace trajmix::io
