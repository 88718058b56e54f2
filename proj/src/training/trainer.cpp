#include "trajmix/training/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "trajmix/core/errors.hpp"
#include "trajmix/tensor/ops.hpp"

namespace trajmix::training {

using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

scene::SceneSnapshot augment_ego(const scene::SceneSnapshot& s, double data_std, Rng& rng) {
  if (!(data_std >= 0.0)) throw DomainError("data_std must be >= 0");
  if (data_std == 0.0) return s;
  return scene::shift_scene(s, scene::draw_anchor_offset(data_std, rng));
}

TrainingExample shift_example(const TrainingExample& e, Point2 offset) {
  TrainingExample out = e;
  for (auto& s : out.window.scenes) s = scene::shift_scene(s, offset);
  for (auto& p : out.future.points) p = Pose2D(p.x - offset.x, p.y - offset.y, p.yaw);
  out.start.pose = Pose2D(e.start.pose.x - offset.x, e.start.pose.y - offset.y, e.start.pose.yaw);
  return out;
}

TrainingExample SceneDataset::example(std::size_t i, double data_std, Rng& rng) const {
  if (i >= examples_.size()) throw DimensionError("example index out of range");
  if (!(data_std >= 0.0)) throw DomainError("data_std must be >= 0");
  if (data_std == 0.0) return examples_[i];
  return shift_example(examples_[i], scene::draw_anchor_offset(data_std, rng));
}

void TrainConfig::validate() const {
  if (iterations < 1) throw DomainError("iterations must be >= 1");
  if (batch_size == 0) throw DomainError("batch_size must be >= 1");
  // Zero is accepted so a frozen run can be expressed; negative rates are rejected.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw DomainError("learning_rate must be >= 0");
  }
  if (!(data_std >= 0.0)) throw DomainError("data_std must be >= 0");
  if (!(sigma_floor > 0.0)) throw DomainError("sigma_floor must be positive");
  loss.validate();
  sector.validate();
  optimizer().validate();
  smoothing.weights.validate();
  smoothing.bounds.validate();
  smoothing.dynamics.validate();
  smoothing.options.validate();
}

AdamWConfig TrainConfig::optimizer() const {
  AdamWConfig a;
  a.learning_rate = learning_rate;
  a.beta1 = beta1;
  a.beta2 = beta2;
  a.weight_decay = loss.weight_decay;
  return a;
}

namespace {

// Smoothed replacement for (K * T) x D samples, same layout.
Tensor smoothed_samples(const Tensor& samples, const TrainingExample& e, const TrainConfig& cfg) {
  const std::size_t t = e.future.size();
  const std::size_t d = samples.cols();
  const std::size_t k = samples.rows() / t;
  Tensor out = samples;
  for (std::size_t ki = 0; ki < k; ++ki) {
    Trajectory ref;
    ref.dt = e.future.dt;
    for (std::size_t ti = 0; ti < t; ++ti) {
      const std::size_t r = ki * t + ti;
      ref.points.emplace_back(samples.at(r, 0), samples.at(r, 1),
                              d > 2 ? samples.at(r, 2) : e.start.pose.yaw);
    }
    const auto& sm = cfg.smoothing;
    const auto res = mpc::smooth(ref, e.start, sm.weights, sm.bounds, sm.dynamics, sm.options);
    const auto coarse = mpc::resample(res.trajectory, e.start.pose, ref.dt, t);
    for (std::size_t ti = 0; ti < t; ++ti) {
      const std::size_t r = ki * t + ti;
      out.at(r, 0) = coarse.points[ti].x;
      out.at(r, 1) = coarse.points[ti].y;
      if (d > 2) out.at(r, 2) = coarse.points[ti].yaw;
    }
  }
  return out;
}

}  // namespace

LossVars example_loss(Tape& tape, const TrajectoryModel& model, const TrainingExample& e,
                      const TrainConfig& cfg, Rng& rng) {
  const auto& hc = model.config().head;
  if (e.future.size() != hc.future_steps) {
    throw DimensionError("future has " + std::to_string(e.future.size()) + " points, model " +
                         std::to_string(hc.future_steps));
  }
  tensor::DropoutContext dropout{model.config().dropout, &rng};
  const auto out = model.forward(tape, e.window, causal::Mode::kTrain, &rng, &dropout);
  Var samples = draw_samples(out.mixture, hc.act_dim, rng, cfg.sigma_floor);
  samples = constrain_samples(samples, e.start.pose, cfg.sector);
  if (cfg.loss_target == LossTarget::kSmoothed) {
    samples = tensor::straight_through(samples, smoothed_samples(samples.value(), e, cfg));
  }
  LossVars loss = item_loss(samples, e.future, out.mixture, cfg.loss);
  if (cfg.loss.latent_kl > 0.0) {
    loss.total = loss.total + tensor::scale(head::latent_kl_standard_normal(out.latent), cfg.loss.latent_kl);
  }
  return loss;
}

TrainResult train(const TrajectoryModel& model, tensor::ParameterStore& store,
                  const Dataset& data, const TrainConfig& cfg,
                  const std::function<void(const LossRecord&)>& on_iteration) {
  cfg.validate();
  if (data.size() == 0) throw DomainError("training dataset is empty");
  Rng rng = Rng::derive(cfg.seed, 1);
  AdamW opt(cfg.optimizer());
  TrainResult result;
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
  for (int it = 0; it < cfg.iterations; ++it) {
    store.zero_grad();
    LossRecord rec;
    rec.iteration = it;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const TrainingExample e = data.example(rng.index(data.size()), cfg.data_std, rng);
      Tape tape(store);
      const LossVars loss = example_loss(tape, model, e, cfg, rng);
      const LossBreakdown v = loss.values();
      if (!std::isfinite(v.total)) {
        throw DomainError("non-finite loss at iteration " + std::to_string(it));
      }
      rec.loss.total += inv_batch * v.total;
      rec.loss.pos += inv_batch * v.pos;
      rec.loss.yaw += inv_batch * v.yaw;
      rec.loss.unc += inv_batch * v.unc;
      rec.loss.kl += inv_batch * v.kl;
      tape.backward(loss.total);
      tape.accumulate_into(store, inv_batch);
    }
    opt.step(store);
    result.history.push_back(rec);
    if (on_iteration) on_iteration(rec);
  }
  return result;
}

void write_loss_csv(std::ostream& os, const std::vector<LossRecord>& history) {
  os << "iteration,total,L_pos,L_yaw,L_unc,L_KL\n";
  os << std::setprecision(12);
  for (const auto& r : history) {
    os << r.iteration << ',' << r.loss.total << ',' << r.loss.pos << ',' << r.loss.yaw << ','
       << r.loss.unc << ',' << r.loss.kl << '\n';
  }
}

void write_loss_csv_file(const std::string& path, const std::vector<LossRecord>& history) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_loss_csv(os, history);
  if (!os) throw std::runtime_error("write failed for " + path);
}

}  // namespace trajmix::training
