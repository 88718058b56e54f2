#include "trajmix/io/config.hpp"

#include <fstream>
#include <set>

#include "trajmix/core/errors.hpp"

namespace trajmix::io {

using nlohmann::json;

namespace {

// Reads known keys of one JSON object and rejects the rest.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigValueError(where_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) throw ConfigValueError(path(key) + " must be a non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigValueError(path(key) + " must be an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigValueError(path(key) + " must be a number");
      }
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigValueError(path(key) + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigValueError("unknown key " + path(key));
    }
  }

 private:
  std::string path(const std::string& key) const { return where_ + "." + key; }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

const char* input_name(training::FrameInput in) {
  return in == training::FrameInput::kScene ? "scene" : "features";
}

const char* target_name(training::LossTarget t) {
  return t == training::LossTarget::kRaw ? "raw" : "smoothed";
}

}  // namespace

training::TrainConfig RunConfig::train_config() const {
  training::TrainConfig t = train;
  t.loss = loss;
  t.sector = sector;
  t.sigma_floor = sampling.sigma_floor;
  t.smoothing = mpc.smoothing();
  t.seed = seed;
  return t;
}

sim::ClosedLoopConfig RunConfig::closed_loop_config() const {
  sim::ClosedLoopConfig c;
  c.n_steps = ring.rollout_steps;
  c.causal_len = model.causal.causal_len;
  c.interval = model.causal.interval;
  c.nms = sampling;
  c.sector = sector;
  c.smoothing = mpc.smoothing();
  return c;
}

void RunConfig::validate() const {
  try {
    model.validate();
    sampling.validate();
    sector.validate();
    mpc.dynamics.validate();
    mpc.weights.validate();
    mpc.bounds.validate();
    mpc.options.validate();
    loss.validate();
    train_config().validate();
    ring.scenario.validate();
    if (ring.episodes == 0) throw DomainError("ring.episodes must be positive");
  } catch (const std::logic_error& e) {
    throw ConfigValueError(e.what());
  }
}

json to_json(const RunConfig& c) {
  const auto& m = c.model;
  const auto& w = c.mpc.weights;
  const auto& b = c.mpc.bounds;
  json j;
  j["seed"] = c.seed;
  j["model"] = {
      {"input", input_name(m.input)},
      {"d_model", m.causal.d_model},
      {"heads", m.causal.heads},
      {"ffn_dim", m.causal.ffn_dim},
      {"scene_local_layers", m.scene.local_layers},
      {"scene_global_layers", m.scene.global_layers},
      {"causal_layers", m.causal.layers},
      {"ego_history_frames", m.scene.ego_history_frames},
      {"agent_history_frames", m.scene.agent_history_frames},
      {"max_agents", m.scene.caps.max_agents},
      {"max_lanes", m.scene.caps.max_lanes},
      {"max_crosswalks", m.scene.caps.max_crosswalks},
      {"feature_dim", m.feature_dim},
      {"causal_len", m.causal.causal_len},
      {"interval", m.causal.interval},
      {"mixtures", m.head.mixtures},
      {"future_steps", m.head.future_steps},
      {"act_dim", m.head.act_dim},
      {"latent_dim", m.head.latent_dim},
      {"log_var_max", m.head.log_var_max},
      {"dropout", m.dropout},
  };
  j["sampling"] = {
      {"n_samples", c.sampling.n_samples}, {"d_min", c.sampling.d_min},
      {"m_sub", c.sampling.m_sub},         {"sigma_floor", c.sampling.sigma_floor},
      {"r_max", c.sector.r_max},           {"theta_max", c.sector.theta_max},
  };
  j["mpc"] = {
      {"dt", c.mpc.dynamics.dt},
      {"wheelbase", c.mpc.dynamics.wheelbase},
      {"pos_w", w.q[0]},
      {"yaw_w", w.q[2]},
      {"vel_w", w.q[3]},
      {"yaw_vel_w", w.q[5]},
      {"acc_w", w.q[6]},
      {"yaw_acc_w", w.q[8]},
      {"control_w", w.r[0]},
      {"yaw_control_w", w.r[2]},
      {"jerk_w", w.jerk},
      {"acc_min", b.lower[0]},
      {"acc_max", b.upper[0]},
      {"yaw_rate_min", b.lower[2]},
      {"yaw_rate_max", b.upper[2]},
      {"max_iterations", c.mpc.options.max_iterations},
      {"gradient_tolerance", c.mpc.options.gradient_tolerance},
  };
  j["loss"] = {{"yaw", c.loss.yaw},
               {"uncertainty", c.loss.uncertainty},
               {"kl", c.loss.kl},
               {"weight_decay", c.loss.weight_decay},
               {"latent_kl", c.loss.latent_kl}};
  j["train"] = {{"iterations", c.train.iterations},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"data_std", c.train.data_std},
                {"loss_target", target_name(c.train.loss_target)}};
  j["ring"] = {{"radius", c.ring.scenario.radius},
               {"speed", c.ring.scenario.speed},
               {"rate", c.ring.scenario.rate},
               {"history_frames", c.ring.scenario.history_frames},
               {"episodes", c.ring.episodes},
               {"rollouts", c.ring.rollouts},
               {"rollout_steps", c.ring.rollout_steps}};
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Fields top(j, "config");
  const json empty = json::object();
  auto section = [&](const char* key) -> const json& {
    const auto it = j.find(key);
    return it == j.end() ? empty : *it;
  };
  top.get("seed", c.seed);
  for (const char* s : {"model", "sampling", "mpc", "loss", "train", "ring"}) {
    json unused;
    top.get(s, unused);
  }
  top.finish();

  {
    auto& m = c.model;
    Fields f(section("model"), "model");
    std::string input = input_name(m.input);
    f.get("input", input);
    if (input == "scene") {
      m.input = training::FrameInput::kScene;
    } else if (input == "features") {
      m.input = training::FrameInput::kFeatures;
    } else {
      throw ConfigValueError("model.input must be \"scene\" or \"features\"");
    }
    std::size_t d = m.causal.d_model, heads = m.causal.heads, ffn = m.causal.ffn_dim;
    f.get("d_model", d);
    f.get("heads", heads);
    f.get("ffn_dim", ffn);
    m.scene.d_model = m.causal.d_model = m.head.d_model = d;
    m.scene.heads = m.causal.heads = heads;
    m.scene.ffn_dim = m.causal.ffn_dim = ffn;
    f.get("scene_local_layers", m.scene.local_layers);
    f.get("scene_global_layers", m.scene.global_layers);
    f.get("causal_layers", m.causal.layers);
    f.get("ego_history_frames", m.scene.ego_history_frames);
    f.get("agent_history_frames", m.scene.agent_history_frames);
    f.get("max_agents", m.scene.caps.max_agents);
    f.get("max_lanes", m.scene.caps.max_lanes);
    f.get("max_crosswalks", m.scene.caps.max_crosswalks);
    f.get("feature_dim", m.feature_dim);
    f.get("causal_len", m.causal.causal_len);
    f.get("interval", m.causal.interval);
    f.get("mixtures", m.head.mixtures);
    f.get("future_steps", m.head.future_steps);
    f.get("act_dim", m.head.act_dim);
    f.get("latent_dim", m.head.latent_dim);
    f.get("log_var_max", m.head.log_var_max);
    f.get("dropout", m.dropout);
    f.finish();
  }
  {
    Fields f(section("sampling"), "sampling");
    f.get("n_samples", c.sampling.n_samples);
    f.get("d_min", c.sampling.d_min);
    f.get("m_sub", c.sampling.m_sub);
    f.get("sigma_floor", c.sampling.sigma_floor);
    f.get("r_max", c.sector.r_max);
    f.get("theta_max", c.sector.theta_max);
    f.finish();
  }
  {
    auto& w = c.mpc.weights;
    auto& b = c.mpc.bounds;
    Fields f(section("mpc"), "mpc");
    f.get("dt", c.mpc.dynamics.dt);
    f.get("wheelbase", c.mpc.dynamics.wheelbase);
    double pos = w.q[0], vel = w.q[3], acc = w.q[6], control = w.r[0];
    double acc_min = b.lower[0], acc_max = b.upper[0];
    f.get("pos_w", pos);
    f.get("yaw_w", w.q[2]);
    f.get("vel_w", vel);
    f.get("yaw_vel_w", w.q[5]);
    f.get("acc_w", acc);
    f.get("yaw_acc_w", w.q[8]);
    f.get("control_w", control);
    f.get("yaw_control_w", w.r[2]);
    f.get("jerk_w", w.jerk);
    f.get("acc_min", acc_min);
    f.get("acc_max", acc_max);
    f.get("yaw_rate_min", b.lower[2]);
    f.get("yaw_rate_max", b.upper[2]);
    f.get("max_iterations", c.mpc.options.max_iterations);
    f.get("gradient_tolerance", c.mpc.options.gradient_tolerance);
    f.finish();
    w.q[0] = w.q[1] = pos;
    w.q[3] = w.q[4] = vel;
    w.q[6] = w.q[7] = acc;
    w.r[0] = w.r[1] = control;
    b.lower[0] = b.lower[1] = acc_min;
    b.upper[0] = b.upper[1] = acc_max;
  }
  {
    Fields f(section("loss"), "loss");
    f.get("yaw", c.loss.yaw);
    f.get("uncertainty", c.loss.uncertainty);
    f.get("kl", c.loss.kl);
    f.get("weight_decay", c.loss.weight_decay);
    f.get("latent_kl", c.loss.latent_kl);
    f.finish();
  }
  {
    auto& t = c.train;
    Fields f(section("train"), "train");
    f.get("iterations", t.iterations);
    f.get("batch_size", t.batch_size);
    f.get("learning_rate", t.learning_rate);
    f.get("beta1", t.beta1);
    f.get("beta2", t.beta2);
    f.get("data_std", t.data_std);
    std::string target = target_name(t.loss_target);
    f.get("loss_target", target);
    if (target == "raw") {
      t.loss_target = training::LossTarget::kRaw;
    } else if (target == "smoothed") {
      t.loss_target = training::LossTarget::kSmoothed;
    } else {
      throw ConfigValueError("train.loss_target must be \"raw\" or \"smoothed\"");
    }
    f.finish();
  }
  {
    auto& r = c.ring;
    Fields f(section("ring"), "ring");
    f.get("radius", r.scenario.radius);
    f.get("speed", r.scenario.speed);
    f.get("rate", r.scenario.rate);
    f.get("history_frames", r.scenario.history_frames);
    f.get("episodes", r.episodes);
    f.get("rollouts", r.rollouts);
    f.get("rollout_steps", r.rollout_steps);
    f.finish();
  }
  c.train = c.train_config();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigFileError("cannot open config " + path);
  const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  json j;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    j = json::object();
  } else {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigParseError("cannot parse " + path + ": " + e.what());
    }
  }
  return config_from_json(j);
}

void save_config(const RunConfig& c, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigFileError("cannot write config " + path);
  os << to_json(c).dump(2) << '\n';
  if (!os) throw ConfigFileError("write failed for " + path);
}

}  // namespace trajmix::io
