#include "trajmix/training/losses.hpp"

#include <cmath>
#include <string>

#include "trajmix/core/errors.hpp"
#include "trajmix/tensor/ops.hpp"

namespace trajmix::training {

using tensor::Shape;
using tensor::Tensor;
using tensor::Var;

void LossWeights::validate() const {
  for (double v : {yaw, uncertainty, kl, weight_decay, latent_kl}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("loss weights must be >= 0");
  }
}

PositionYawLoss position_yaw_loss(const std::vector<std::vector<TrajectorySample>>& samples,
                                  const std::vector<Trajectory>& gt) {
  if (samples.size() != gt.size()) throw DimensionError("batch size mismatch");
  double pos = 0.0, yaw = 0.0;
  std::size_t n = 0;
  for (std::size_t b = 0; b < gt.size(); ++b) {
    for (const auto& s : samples[b]) {
      const auto& pts = s.trajectory.points;
      if (pts.size() != gt[b].size()) {
        throw DimensionError("sample horizon " + std::to_string(pts.size()) + " vs truth " +
                             std::to_string(gt[b].size()));
      }
      for (std::size_t t = 0; t < pts.size(); ++t) {
        const Pose2D& g = gt[b].points[t];
        pos += std::abs(pts[t].x - g.x) + std::abs(pts[t].y - g.y);
        yaw += std::abs(wrap_angle(pts[t].yaw - g.yaw));
        ++n;
      }
    }
  }
  if (n == 0) return {};
  return {pos / static_cast<double>(n), yaw / static_cast<double>(n)};
}

double uncertainty_loss(const std::vector<double>& stds) {
  if (stds.empty()) throw DimensionError("uncertainty_loss of an empty set");
  double acc = 0.0;
  for (double s : stds) acc += std::log(s * s + kUncertaintyEps);
  return -acc / static_cast<double>(stds.size());
}

double kl_categorical_uniform(const std::vector<double>& weights) {
  if (weights.empty()) throw DimensionError("kl of an empty distribution");
  const double k = static_cast<double>(weights.size());
  double kl = 0.0;
  for (double p : weights) {
    if (p < 0.0 || !std::isfinite(p)) throw DomainError("weights must be finite and >= 0");
    if (p > 0.0) kl += p * std::log(p * k);
  }
  return kl;
}

LossBreakdown composite_loss(const std::vector<std::vector<TrajectorySample>>& samples,
                             const std::vector<Trajectory>& gt,
                             const std::vector<std::vector<double>>& stds,
                             const std::vector<std::vector<double>>& weights,
                             const LossWeights& w) {
  w.validate();
  if (stds.size() != gt.size() || weights.size() != gt.size()) {
    throw DimensionError("batch size mismatch");
  }
  LossBreakdown out;
  const auto py = position_yaw_loss(samples, gt);
  out.pos = py.pos;
  out.yaw = py.yaw;
  for (std::size_t b = 0; b < gt.size(); ++b) {
    out.unc += uncertainty_loss(stds[b]);
    out.kl += kl_categorical_uniform(weights[b]);
  }
  if (!gt.empty()) {
    out.unc /= static_cast<double>(gt.size());
    out.kl /= static_cast<double>(gt.size());
  }
  out.total = out.pos + w.yaw * out.yaw + w.uncertainty * out.unc + w.kl * out.kl;
  return out;
}

Var uncertainty_loss(Var stds) {
  return tensor::scale(tensor::mean(tensor::log(tensor::add_scalar(tensor::square(stds),
                                                                    kUncertaintyEps))),
                       -1.0);
}

Var kl_categorical_uniform(Var weights, Var log_weights) {
  const double log_k = std::log(static_cast<double>(weights.size()));
  return tensor::sum(tensor::mul(weights, tensor::add_scalar(log_weights, log_k)));
}

Var draw_samples(const head::MixtureVars& m, std::size_t act_dim, Rng& rng, double sigma_floor) {
  const Tensor& mu = m.means.value();
  Tensor eps(mu.shape());
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  Var noise = m.means.tape().constant(std::move(eps));
  Var y = tensor::add(m.means, tensor::mul(tensor::clamp_min(m.stds, sigma_floor), noise));
  return tensor::reshape(y, Shape{mu.size() / act_dim, act_dim});
}

Var constrain_samples(Var samples, const Pose2D& anchor, const constraints::SectorSpec& spec) {
  const std::size_t d = samples.cols();
  Var xy = tensor::slice_cols(samples, 0, 2);
  const bool identity = anchor.x == 0.0 && anchor.y == 0.0 && anchor.yaw == 0.0;
  tensor::Tape& tape = samples.tape();
  if (identity) {
    xy = constraints::sector_project_local(xy, spec);
  } else {
    const double c = std::cos(anchor.yaw), s = std::sin(anchor.yaw);
    Var to_local = tape.constant(Tensor::matrix(2, 2, {c, -s, s, c}));
    Var to_world = tape.constant(Tensor::matrix(2, 2, {c, s, -s, c}));
    Var offset = tape.constant(Tensor::row({anchor.x, anchor.y}));
    Var local = tensor::matmul(tensor::add_row(xy, tensor::scale(offset, -1.0)), to_local);
    local = constraints::sector_project_local(local, spec);
    xy = tensor::add_row(tensor::matmul(local, to_world), offset);
  }
  if (d == 2) return xy;
  const Var parts[] = {xy, tensor::slice_cols(samples, 2, d - 2)};
  return tensor::concat_cols(parts);
}

LossBreakdown LossVars::values() const {
  return {total.value()[0], pos.value()[0], yaw.value()[0], unc.value()[0], kl.value()[0]};
}

LossVars item_loss(Var samples, const Trajectory& gt, const head::MixtureVars& m,
                   const LossWeights& w) {
  w.validate();
  const std::size_t d = samples.cols();
  const std::size_t t = gt.size();
  if (t == 0 || samples.rows() % t != 0) throw DimensionError("sample rows do not match horizon");
  const std::size_t k = samples.rows() / t;
  Tensor truth(Shape{k * t, d});
  for (std::size_t ki = 0; ki < k; ++ki) {
    for (std::size_t ti = 0; ti < t; ++ti) {
      const Pose2D& g = gt.points[ti];
      const std::size_t r = ki * t + ti;
      truth.at(r, 0) = g.x;
      truth.at(r, 1) = g.y;
      if (d > 2) truth.at(r, 2) = g.yaw;
    }
  }
  tensor::Tape& tape = samples.tape();
  Var diff = tensor::sub(samples, tape.constant(std::move(truth)));
  const double rows = static_cast<double>(k * t);
  LossVars out;
  out.pos = tensor::scale(tensor::sum(tensor::abs(tensor::slice_cols(diff, 0, 2))), 1.0 / rows);
  if (d > 2) {
    out.yaw = tensor::mean(tensor::abs(tensor::wrap_angle(tensor::slice_cols(diff, 2, 1))));
  } else {
    out.yaw = tape.constant(Tensor::scalar(0.0));
  }
  out.unc = uncertainty_loss(m.stds);
  out.kl = kl_categorical_uniform(m.weights, m.log_weights);
  out.total = out.pos + w.yaw * out.yaw + w.uncertainty * out.unc + w.kl * out.kl;
  return out;
}

}  // namespace trajmix::training
