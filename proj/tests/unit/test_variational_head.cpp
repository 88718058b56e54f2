#include <cmath>

#include "doctest.h"
#include "trajmix/core/errors.hpp"
#include "trajmix/core/geometry.hpp"
#include "trajmix/head/variational_head.hpp"
#include "trajmix/tensor/gradcheck.hpp"

using namespace trajmix;
using namespace trajmix::head;
using namespace trajmix::tensor;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Tensor random_tensor(Shape shape, Rng& rng, double s = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-s, s);
  return t;
}

HeadConfig small_config() {
  HeadConfig c;
  c.d_model = 8;
  c.mixtures = 3;
  c.future_steps = 4;
  c.act_dim = 3;
  c.latent_dim = 5;
  return c;
}

double brute_force_loglik(const std::vector<double>& y, const GaussianMixtureTrajectory& g) {
  double total = 0.0;
  for (std::size_t k = 0; k < g.k; ++k) {
    double dens = g.weights[k];
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double s = g.stds[k * y.size() + i];
      const double z = (y[i] - g.means[k * y.size() + i]) / s;
      dens *= std::exp(-0.5 * z * z) / (s * std::sqrt(2 * kPi));
    }
    total += dens;
  }
  return std::log(total);
}

}  // namespace

TEST_CASE("predict_mixture examples") {
  Rng rng(1);
  ParameterStore store;
  auto head = VariationalHead::create(store, "head", small_config(), rng);
  Tensor ctx = random_tensor({1, 8}, rng);

  SUBCASE("zero logits give uniform weights") {
    ParameterStore s = store;
    s.value("head.pi.fc2.weight").fill(0.0);
    s.value("head.pi.fc2.bias").fill(0.0);
    Tape tape(s);
    auto out = head.forward(tape, tape.constant(ctx), Mode::kInfer, nullptr);
    for (double w : out.mixture.weights.value().values()) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("log-variance at the clamp boundary") {
    ParameterStore s = store;
    s.value("head.log_var.weight").fill(0.0);
    s.value("head.log_var.bias").fill(10.0);
    Tape tape(s);
    auto out = head.forward(tape, tape.constant(ctx), Mode::kInfer, nullptr);
    for (double v : out.mixture.stds.value().values()) CHECK(v == std::exp(5.0));
    s.value("head.log_var.bias").fill(40.0);
    Tape tape2(s);
    auto out2 = head.forward(tape2, tape2.constant(ctx), Mode::kInfer, nullptr);
    for (double v : out2.mixture.stds.value().values()) CHECK(v == std::exp(5.0));
  }
  SUBCASE("default shapes") {
    ParameterStore s;
    HeadConfig cfg;
    auto h = VariationalHead::create(s, "head", cfg, rng);
    Tape tape(s);
    auto out = h.forward(tape, tape.constant(random_tensor({1, 128}, rng)), Mode::kInfer, nullptr);
    auto g = to_mixture(out.mixture, cfg.future_steps, cfg.act_dim);
    CHECK(g.k == 6);
    CHECK(g.t == 15);
    CHECK(g.d == 3);
    CHECK(out.v.cols() == 16);
    CHECK(out.v_seq.rows() == 15);
    CHECK_NOTHROW(g.validate());
  }
  SUBCASE("non-finite context") {
    Tensor bad = ctx;
    bad[2] = NAN;
    Tape tape(store);
    CHECK_THROWS_AS(head.forward(tape, tape.constant(bad), Mode::kInfer, nullptr), DomainError);
  }
  SUBCASE("weights stay on the simplex") {
    for (int i = 0; i < 50; ++i) {
      Tape tape(store);
      auto out = head.forward(tape, tape.constant(random_tensor({1, 8}, rng, 20.0)), Mode::kInfer, nullptr);
      double sum = 0;
      for (double w : out.mixture.weights.value().values()) {
        CHECK(w >= 0.0);
        sum += w;
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
  SUBCASE("latent offset is shared across mixtures") {
    Tape tape(store);
    Var c = tape.constant(ctx);
    Var v0 = tape.constant(Tensor(Shape{4, 5}, 0.0));
    Var v1 = tape.constant(random_tensor({4, 5}, rng));
    auto m0 = head.predict_mixture(tape, c, v0).means.value();
    auto m1 = head.predict_mixture(tape, c, v1).means.value();
    for (std::size_t t = 0; t < 12; ++t) {
      const double d0 = m1.at(0, t) - m0.at(0, t);
      for (std::size_t k = 1; k < 3; ++k) CHECK(m1.at(k, t) - m0.at(k, t) == doctest::Approx(d0).epsilon(1e-12));
    }
  }
}

TEST_CASE("latent posterior") {
  Rng rng(2);
  ParameterStore store;
  auto head = VariationalHead::create(store, "head", small_config(), rng);
  Tensor ctx = random_tensor({1, 8}, rng);
  SUBCASE("zero parameters") {
    ParameterStore z = store;
    z.fill_values(0.0);
    Tape tape(z);
    auto post = to_posterior(head.latent_posterior(tape, tape.constant(ctx)));
    for (double m : post.mean) CHECK(m == 0.0);
    for (double s : post.std) CHECK(s == 1.0);
  }
  SUBCASE("composition oracle") {
    Tape tape(store);
    Var c = tape.constant(ctx);
    auto post = head.latent_posterior(tape, c);
    LstmState zero{tape.constant(Tensor(Shape{1, 5}, 0.0)), tape.constant(Tensor(Shape{1, 5}, 0.0))};
    auto st = lstm_cell_step(c, zero, tape.parameter("head.latent_mean.w_ih"),
                             tape.parameter("head.latent_mean.w_hh"), tape.parameter("head.latent_mean.bias"));
    CHECK(post.mean.value() == st.h.value());
    Var lv = linear(c, tape.parameter("head.latent_log_var.weight"), tape.parameter("head.latent_log_var.bias"));
    for (std::size_t i = 0; i < 5; ++i) CHECK(post.std.value()[i] == std::exp(0.5 * std::min(lv.value()[i], 10.0)));
  }
  SUBCASE("sampling") {
    LatentPosterior p{{0.5, -1.0}, {0.3, 2.0}};
    Rng r(3);
    CHECK(sample_latent(p, Mode::kInfer, r) == p.mean);
    LatentPosterior tiny{{0.5, -1.0}, {1e-300, 1e-300}};
    auto s = sample_latent(tiny, Mode::kTrain, r);
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));
    const int n = 100000;
    double m0 = 0, m1 = 0;
    for (int i = 0; i < n; ++i) {
      auto v = sample_latent(p, Mode::kTrain, r);
      m0 += v[0];
      m1 += v[1];
    }
    CHECK(std::abs(m0 / n - 0.5) < 4 * 0.3 / std::sqrt(n));
    CHECK(std::abs(m1 / n + 1.0) < 4 * 2.0 / std::sqrt(n));
  }
  SUBCASE("inference needs no rng and is exact") {
    Tape tape(store);
    auto post = head.latent_posterior(tape, tape.constant(ctx));
    Var v = head.sample_latent(tape, post, Mode::kInfer, nullptr);
    CHECK(v.value() == post.mean.value());
    CHECK_THROWS_AS(head.sample_latent(tape, post, Mode::kTrain, nullptr), StateError);
  }
}

TEST_CASE("propagate_latent") {
  Rng rng(4);
  ParameterStore store;
  auto head = VariationalHead::create(store, "head", small_config(), rng);
  Tensor v = random_tensor({1, 5}, rng);
  SUBCASE("zero parameters") {
    ParameterStore z = store;
    z.fill_values(0.0);
    Tape tape(z);
    for (double x : head.propagate_latent(tape, tape.constant(v)).value().values()) CHECK(x == 0.0);
  }
  SUBCASE("matches manual steps") {
    Tape tape(store);
    Var vv = tape.constant(v);
    auto seq = head.propagate_latent(tape, vv).value();
    REQUIRE(seq.rows() == 4);
    LstmState st{tape.constant(Tensor(Shape{1, 5}, 0.0)), tape.constant(Tensor(Shape{1, 5}, 0.0))};
    for (std::size_t t = 0; t < 4; ++t) {
      st = lstm_cell_step(vv, st, tape.parameter("head.latent_transition.w_ih"),
                          tape.parameter("head.latent_transition.w_hh"),
                          tape.parameter("head.latent_transition.bias"));
      for (std::size_t j = 0; j < 5; ++j) CHECK(seq.at(t, j) == st.h.value()[j]);
    }
  }
}

TEST_CASE("mixture log-likelihood") {
  SUBCASE("standard normal at the mean") {
    GaussianMixtureTrajectory g{1, 2, 3, std::vector<double>(6, 0.7), std::vector<double>(6, 1.0), {1.0}};
    CHECK(mixture_log_likelihood(std::vector<double>(6, 0.7), g) ==
          doctest::Approx(-3.0 * kLog2Pi).epsilon(1e-14));
    GaussianMixtureTrajectory h = g;
    for (auto& s : h.stds) s = 2.0;
    CHECK(mixture_log_likelihood(std::vector<double>(6, 0.7), g) -
              mixture_log_likelihood(std::vector<double>(6, 0.7), h) ==
          doctest::Approx(6 * std::log(2.0)).epsilon(1e-13));
  }
  SUBCASE("symmetric pair at the midpoint") {
    GaussianMixtureTrajectory g{2, 1, 2, {-1, -1, 1, 1}, {1, 1, 1, 1}, {0.5, 0.5}};
    std::vector<double> y{0, 0};
    CHECK(std::abs(mixture_log_likelihood(y, g) - brute_force_loglik(y, g)) < 1e-12);
  }
  SUBCASE("random instances against brute force") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      GaussianMixtureTrajectory g;
      g.k = 1 + rng.index(4);
      g.t = 1 + rng.index(3);
      g.d = 3;
      const std::size_t n = g.t * g.d;
      double z = 0;
      for (std::size_t k = 0; k < g.k; ++k) {
        g.weights.push_back(rng.uniform(0.05, 1.0));
        z += g.weights.back();
      }
      for (auto& w : g.weights) w /= z;
      for (std::size_t i = 0; i < g.k * n; ++i) {
        g.means.push_back(rng.uniform(-1, 1));
        g.stds.push_back(rng.uniform(0.5, 2.0));
      }
      std::vector<double> y(n);
      for (auto& v : y) v = rng.uniform(-1, 1);
      CHECK(std::abs(mixture_log_likelihood(y, g) - brute_force_loglik(y, g)) < 1e-9);
    }
  }
  SUBCASE("tape version agrees and passes a gradient check") {
    Rng rng(6);
    ParameterStore store;
    auto head = VariationalHead::create(store, "head", small_config(), rng);
    Tensor ctx = random_tensor({1, 8}, rng);
    Tensor y = random_tensor({4, 3}, rng, 0.5);
    Tape tape(store);
    auto out = head.forward(tape, tape.constant(ctx), Mode::kInfer, nullptr);
    Var ll = mixture_log_likelihood(tape.constant(y), out.mixture);
    auto g = to_mixture(out.mixture, 4, 3);
    CHECK(ll.value()[0] == doctest::Approx(mixture_log_likelihood(y.storage(), g)).epsilon(1e-12));

    auto loss = [&](Tape& t) {
      Rng r(11);
      auto o = head.forward(t, t.constant(ctx), Mode::kTrain, &r);
      return mixture_log_likelihood(t.constant(y), o.mixture) + latent_kl_standard_normal(o.latent);
    };
    auto res = finite_difference_check(loss, store);
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-5);
  }
}

TEST_CASE("latent KL to the standard normal") {
  Tape tape;
  LatentVars l;
  l.mean = tape.variable(Tensor::row({0.0, 0.0}));
  l.log_var = tape.variable(Tensor::row({0.0, 0.0}));
  l.std = exp(scale(l.log_var, 0.5));
  CHECK(latent_kl_standard_normal(l).value()[0] == 0.0);
  LatentVars m;
  m.mean = tape.variable(Tensor::row({1.0}));
  m.log_var = tape.variable(Tensor::row({std::log(4.0)}));
  m.std = exp(scale(m.log_var, 0.5));
  CHECK(latent_kl_standard_normal(m).value()[0] == doctest::Approx(0.5 * (1 + 4 - 1 - std::log(4.0))));
}
