#include "trajmix/head/variational_head.hpp"

#include <cmath>

#include "trajmix/core/errors.hpp"

namespace trajmix::head {

using tensor::Shape;
using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

VariationalHead VariationalHead::create(tensor::ParameterStore& store, const std::string& name,
                                        const HeadConfig& cfg, Rng& rng) {
  if (cfg.mixtures == 0 || cfg.future_steps == 0 || cfg.act_dim == 0 || cfg.latent_dim == 0) {
    throw DomainError("mixture head dimensions must be positive");
  }
  VariationalHead h;
  h.cfg_ = cfg;
  h.name_ = name;
  const std::size_t d = cfg.d_model;
  const std::size_t n = cfg.mixtures * cfg.future_steps * cfg.act_dim;
  h.mean_head_ = tensor::Linear::create(store, name + ".mean", d, n, rng);
  h.log_var_head_ = tensor::Linear::create(store, name + ".log_var", d, n, rng);
  h.latent_offset_ =
      tensor::Linear::create(store, name + ".latent_offset", cfg.latent_dim, cfg.act_dim, rng, false);
  h.pi_head_ = tensor::Mlp::create(store, name + ".pi", d, d, cfg.mixtures, rng);
  h.latent_mean_ = tensor::LstmCell::create(store, name + ".latent_mean", d, cfg.latent_dim, rng);
  h.latent_log_var_ = tensor::Linear::create(store, name + ".latent_log_var", d, cfg.latent_dim, rng);
  h.latent_transition_ =
      tensor::LstmCell::create(store, name + ".latent_transition", cfg.latent_dim, cfg.latent_dim, rng);
  return h;
}

LatentVars VariationalHead::latent_posterior(Tape& tape, Var context) const {
  if (!context.value().all_finite()) throw DomainError("non-finite context vector");
  LatentVars l;
  l.mean = latent_mean_(tape, context, latent_mean_.zero_state(tape)).h;
  l.log_var = tensor::clamp_max(latent_log_var_(tape, context), cfg_.log_var_max);
  l.std = tensor::exp(tensor::scale(l.log_var, 0.5));
  return l;
}

Var VariationalHead::sample_latent(Tape& tape, const LatentVars& posterior, Mode mode,
                                   Rng* rng) const {
  if (mode == Mode::kInfer) return posterior.mean;
  if (!rng) throw StateError("training-mode latent sampling needs an rng");
  Tensor eps(Shape{1, cfg_.latent_dim});
  for (auto& e : eps.values()) e = rng->normal();
  return tensor::add(posterior.mean, tensor::mul(posterior.std, tape.constant(std::move(eps))));
}

Var VariationalHead::propagate_latent(Tape& tape, Var v) const {
  if (v.size() != cfg_.latent_dim) throw DimensionError("latent vector width mismatch");
  tensor::LstmState st = latent_transition_.zero_state(tape);
  std::vector<Var> steps;
  steps.reserve(cfg_.future_steps);
  for (std::size_t t = 0; t < cfg_.future_steps; ++t) {
    st = latent_transition_(tape, v, st);
    steps.push_back(st.h);
  }
  return steps.size() == 1 ? steps[0] : tensor::concat_rows(steps);
}

MixtureVars VariationalHead::predict_mixture(Tape& tape, Var context, Var v_seq) const {
  if (!context.value().all_finite()) throw DomainError("non-finite context vector");
  const std::size_t k = cfg_.mixtures, n = cfg_.future_steps * cfg_.act_dim;
  if (v_seq.rows() != cfg_.future_steps || v_seq.cols() != cfg_.latent_dim) {
    throw DimensionError("latent sequence must be T x latent_dim");
  }
  MixtureVars m;
  Var offset = tensor::reshape(latent_offset_(tape, v_seq), Shape{1, n});
  Var base = tensor::reshape(mean_head_(tape, context), Shape{k, n});
  m.means = tensor::add(base, tensor::tile_rows(offset, k));
  m.log_var = tensor::clamp_max(tensor::reshape(log_var_head_(tape, context), Shape{k, n}),
                                cfg_.log_var_max);
  m.stds = tensor::exp(tensor::scale(m.log_var, 0.5));
  m.logits = pi_head_(tape, context);
  m.weights = tensor::softmax_rows(m.logits);
  m.log_weights = tensor::log_softmax_rows(m.logits);
  return m;
}

HeadOutput VariationalHead::forward(Tape& tape, Var context, Mode mode, Rng* rng) const {
  HeadOutput out;
  out.latent = latent_posterior(tape, context);
  out.v = sample_latent(tape, out.latent, mode, rng);
  out.v_seq = propagate_latent(tape, out.v);
  out.mixture = predict_mixture(tape, context, out.v_seq);
  return out;
}

GaussianMixtureTrajectory to_mixture(const MixtureVars& m, std::size_t future_steps,
                                     std::size_t act_dim) {
  GaussianMixtureTrajectory g;
  g.k = m.weights.size();
  g.t = future_steps;
  g.d = act_dim;
  const auto& mv = m.means.value().storage();
  const auto& sv = m.stds.value().storage();
  if (mv.size() != g.k * g.t * g.d) throw DimensionError("mixture layout mismatch");
  g.means = mv;
  g.stds = sv;
  g.weights = m.weights.value().storage();
  return g;
}

LatentPosterior to_posterior(const LatentVars& l) {
  return {l.mean.value().storage(), l.std.value().storage()};
}

std::vector<double> sample_latent(const LatentPosterior& posterior, Mode mode, Rng& rng) {
  if (mode == Mode::kInfer) return posterior.mean;
  std::vector<double> v(posterior.mean.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = posterior.mean[i] + posterior.std[i] * rng.normal();
  return v;
}

Var mixture_log_likelihood(Var y, const MixtureVars& m) {
  const std::size_t k = m.means.rows(), n = m.means.cols();
  if (y.size() != n) throw DimensionError("observation length does not match the mixture");
  Var diff = tensor::sub(m.means, tensor::tile_rows(tensor::reshape(y, Shape{1, n}), k));
  Var z = tensor::mul(diff, tensor::reciprocal(m.stds));
  Var per = tensor::sub(tensor::scale(tensor::square(z), -0.5), tensor::log(m.stds));
  Var comp = tensor::add_scalar(tensor::sum_cols(per), -0.5 * kLog2Pi * static_cast<double>(n));
  Var terms = tensor::add(tensor::reshape(comp, Shape{1, k}), m.log_weights);
  return tensor::reshape(tensor::logsumexp_rows(terms), Shape{1});
}

Var latent_kl_standard_normal(const LatentVars& l) {
  Var var = tensor::exp(l.log_var);
  Var inner = tensor::sub(tensor::add(tensor::square(l.mean), var), tensor::add_scalar(l.log_var, 1.0));
  return tensor::scale(tensor::sum(inner), 0.5);
}

}  // namespace trajmix::head
