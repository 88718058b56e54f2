#include "trajmix/sim/closed_loop.hpp"

#include <cmath>
#include <string>

#include "trajmix/core/errors.hpp"

namespace trajmix::sim {

void ClosedLoopConfig::validate() const {
  if (causal_len == 0 || interval == 0) throw DomainError("causal_len and interval must be positive");
  nms.validate();
  sector.validate();
  smoothing.weights.validate();
  smoothing.bounds.validate();
  smoothing.dynamics.validate();
  smoothing.options.validate();
}

RolloutResult closed_loop_rollout(const Predictor& predictor, const RingScenario& sc,
                                  const ClosedLoopConfig& cfg, double start_angle, Rng& rng) {
  sc.validate();
  cfg.validate();
  const std::size_t n_context = ring_context_frames(sc, cfg.causal_len, cfg.interval);
  const double step = sc.angle_step();
  std::vector<Pose2D> context;
  for (std::size_t i = 0; i < n_context; ++i) {
    context.push_back(sc.pose_at(start_angle - static_cast<double>(n_context - 1 - i) * step));
  }
  const auto exec_index = static_cast<std::size_t>(std::llround(sc.dt() / cfg.smoothing.dynamics.dt));
  if (exec_index == 0) throw DomainError("scenario step shorter than the smoother step");

  RolloutResult res;
  res.executed.dt = sc.dt();
  res.ground_truth.dt = sc.dt();
  const Pose2D origin;
  for (std::size_t s = 0; s < cfg.n_steps; ++s) {
    const Pose2D anchor = context.back();
    const training::Window window = ring_window(context, sc, cfg.causal_len, cfg.interval);
    const auto gmm = predictor(PredictionContext{window, anchor});
    for (double v : gmm.means) {
      if (!std::isfinite(v)) throw DomainError("non-finite prediction at step " + std::to_string(s));
    }
    gmm.validate();
    auto samples = constraints::nms_sample(gmm, cfg.nms, rng, sc.dt());
    for (auto& smp : samples) {
      smp.trajectory = constraints::sector_project_trajectory(smp.trajectory, origin, cfg.sector);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (samples[i].probability > samples[best].probability) best = i;
    }
    const VehicleState start = ring_start_state(context, sc);
    StepRecord rec;
    rec.anchor = anchor;
    rec.start = start;
    rec.chosen = best;
    Pose2D next_local;
    const auto& sm = cfg.smoothing;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!cfg.smooth) {
        if (i == best) next_local = samples[i].trajectory.points.front();
        continue;
      }
      const bool needed = cfg.keep_steps || i == best;
      if (!needed) continue;
      const auto out = mpc::smooth(samples[i].trajectory, start, sm.weights, sm.bounds,
                                   sm.dynamics, sm.options);
      if (i == best) {
        if (out.states.size() <= exec_index) throw DomainError("smoothed horizon too short");
        next_local = out.states[exec_index].pose;
      }
      if (cfg.keep_steps) {
        rec.smoothed.push_back(
            mpc::resample(out.trajectory, origin, sc.dt(), samples[i].trajectory.size()));
      }
    }
    const Pose2D next = pose_ego_to_world(anchor, next_local);
    context.erase(context.begin());
    context.push_back(next);
    res.executed.points.push_back(next);
    res.ground_truth.points.push_back(sc.pose_at(start_angle + static_cast<double>(s + 1) * step));
    if (cfg.keep_steps) {
      rec.raw = std::move(samples);
      res.steps.push_back(std::move(rec));
    }
  }
  return res;
}

std::vector<RolloutResult> run_rollouts(const Predictor& predictor, const RingScenario& sc,
                                        const ClosedLoopConfig& cfg, std::size_t n,
                                        std::uint64_t seed) {
  Rng starts = Rng::derive(seed, 0);
  std::vector<RolloutResult> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = starts.uniform(-kPi, kPi);
    Rng rng = Rng::derive(seed, 1000 + i);
    out.push_back(closed_loop_rollout(predictor, sc, cfg, angle, rng));
  }
  return out;
}

MetricsReport evaluate_rollouts(const std::vector<RolloutResult>& rollouts, const RingScenario& sc) {
  std::vector<Trajectory> exec, gt;
  for (const auto& r : rollouts) {
    exec.push_back(r.executed);
    gt.push_back(r.ground_truth);
  }
  return evaluate(exec, gt, CirclePath{{0.0, 0.0}, sc.radius});
}

Predictor model_predictor(const training::TrajectoryModel& model,
                          const tensor::ParameterStore& store) {
  return [&model, &store](const PredictionContext& ctx) { return model.predict(store, ctx.window); };
}

Predictor oracle_predictor(const RingScenario& sc, std::size_t mixtures, std::size_t future_steps) {
  return [sc, mixtures, future_steps](const PredictionContext& ctx) {
    const Trajectory local = transform_to_ego(ctx.anchor, ring_future(sc, ctx.anchor, future_steps));
    head::GaussianMixtureTrajectory g;
    g.k = mixtures;
    g.t = future_steps;
    g.d = 3;
    for (std::size_t k = 0; k < mixtures; ++k) {
      for (const Pose2D& p : local.points) {
        g.means.insert(g.means.end(), {p.x, p.y, p.yaw});
        g.stds.insert(g.stds.end(), {1e-6, 1e-6, 1e-6});
      }
      g.weights.push_back(1.0 / static_cast<double>(mixtures));
    }
    return g;
  };
}

DiscomfortComparison compare_smoothing_discomfort(const std::vector<StepRecord>& steps) {
  std::vector<Trajectory> raw, smooth;
  DiscomfortComparison c;
  for (const auto& s : steps) {
    if (s.smoothed.size() != s.raw.size()) {
      throw DimensionError("step record lacks smoothed samples");
    }
    for (std::size_t i = 0; i < s.raw.size(); ++i) {
      if (s.raw[i].padded) continue;
      raw.push_back(with_start(Pose2D(), s.raw[i].trajectory));
      smooth.push_back(with_start(Pose2D(), s.smoothed[i]));
    }
    ++c.scenes;
  }
  c.raw = discomfort_rate(raw);
  c.smoothed = discomfort_rate(smooth);
  return c;
}

}  // namespace trajmix::sim
