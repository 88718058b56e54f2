#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "trajmix/core/errors.hpp"
#include "trajmix/tensor/gradcheck.hpp"
#include "trajmix/tensor/ops.hpp"
#include "trajmix/training/trainer.hpp"

using namespace trajmix;
using namespace trajmix::training;
using tensor::ParameterStore;
using tensor::Shape;
using tensor::Tape;
using tensor::Tensor;

namespace {

Trajectory line(std::size_t n, double dx, double dy, double yaw) {
  Trajectory t;
  for (std::size_t i = 0; i < n; ++i) t.points.emplace_back(i + dx, 0.5 * i + dy, yaw);
  return t;
}

TrajectorySample sample_of(Trajectory t) {
  TrajectorySample s;
  s.trajectory = std::move(t);
  return s;
}

class ListDataset : public Dataset {
 public:
  explicit ListDataset(std::vector<TrainingExample> e) : e_(std::move(e)) {}
  std::size_t size() const override { return e_.size(); }
  TrainingExample example(std::size_t i, double, Rng&) const override { return e_[i]; }

 private:
  std::vector<TrainingExample> e_;
};

}  // namespace

TEST_CASE("position_yaw_loss examples") {
  const Trajectory gt = line(5, 0, 0, 0.3);
  auto l = position_yaw_loss({{sample_of(gt), sample_of(gt)}}, {gt});
  CHECK(l.pos == 0.0);
  CHECK(l.yaw == 0.0);
  l = position_yaw_loss({{sample_of(line(5, 1.0, 0, 0.3))}}, {gt});
  CHECK(l.pos == doctest::Approx(1.0).epsilon(1e-15));
  Trajectory a, b;
  a.points.emplace_back(0, 0, 0);
  b.points.emplace_back(0, 0, 0);
  a.points[0].yaw = kPi;
  b.points[0].yaw = -kPi;
  l = position_yaw_loss({{sample_of(a)}}, {b});
  CHECK(l.yaw == 0.0);
  CHECK_THROWS_AS(position_yaw_loss({{sample_of(line(4, 0, 0, 0))}}, {gt}), DimensionError);
}

TEST_CASE("uncertainty_loss examples") {
  CHECK(uncertainty_loss(std::vector<double>(12, 1.0)) == doctest::Approx(-std::log(1.0 + 1e-6)));
  CHECK(uncertainty_loss(std::vector<double>(12, std::exp(1.0))) == doctest::Approx(-2.0).epsilon(1e-6));
  const std::vector<double> mixed{0.1, 0.5, 2.0, 3.5};
  double acc = 0.0;
  for (double s : mixed) acc += std::log(s * s + 1e-6);
  CHECK(uncertainty_loss(mixed) == doctest::Approx(-acc / 4).epsilon(1e-15));
}

TEST_CASE("kl_categorical_uniform examples") {
  CHECK(std::abs(kl_categorical_uniform(std::vector<double>(6, 1.0 / 6))) < 1e-12);
  CHECK(kl_categorical_uniform({1, 0, 0, 0, 0, 0}) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
  CHECK(kl_categorical_uniform({0.5, 0.5, 0, 0, 0, 0}) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(kl_categorical_uniform({1.2, -0.2}), DomainError);
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> w(5);
    double s = 0;
    for (auto& v : w) s += (v = rng.uniform());
    for (auto& v : w) v /= s;
    CHECK(kl_categorical_uniform(w) >= 0.0);
  }
}

TEST_CASE("tape losses agree with plain versions") {
  Tape tape;
  const std::vector<double> sd{0.3, 1.2, 0.8, 2.0};
  auto s = tape.variable(Tensor::row(sd));
  CHECK(uncertainty_loss(s).value()[0] == doctest::Approx(uncertainty_loss(sd)).epsilon(1e-14));
  const std::vector<double> w{0.1, 0.2, 0.7};
  auto wv = tape.variable(Tensor::row(w));
  auto lw = tape.variable(Tensor::row({std::log(0.1), std::log(0.2), std::log(0.7)}));
  CHECK(kl_categorical_uniform(wv, lw).value()[0] ==
        doctest::Approx(kl_categorical_uniform(w)).epsilon(1e-14));
}

TEST_CASE("composite_loss examples") {
  const Trajectory gt = line(4, 0, 0, 0.1);
  const std::vector<std::vector<double>> uniform{{0.5, 0.5}};
  const std::vector<std::vector<double>> ones{std::vector<double>(8, 1.0)};
  LossWeights w;
  auto l = composite_loss({{sample_of(gt), sample_of(gt)}}, {gt}, ones, uniform, w);
  CHECK(l.total == doctest::Approx(w.uncertainty * -std::log(1.0 + 1e-6)));
  CHECK(std::abs(l.total) < 1e-6);

  Rng rng(3);
  std::vector<std::vector<TrajectorySample>> samples(2);
  std::vector<Trajectory> truth;
  std::vector<std::vector<double>> stds(2), weights(2);
  for (int b = 0; b < 2; ++b) {
    truth.push_back(line(4, rng.normal(), rng.normal(), rng.normal()));
    for (int k = 0; k < 3; ++k) samples[b].push_back(sample_of(line(4, rng.normal(), rng.normal(), rng.normal())));
    for (int i = 0; i < 12; ++i) stds[b].push_back(rng.uniform(0.1, 2));
    weights[b] = {0.2, 0.3, 0.5};
  }
  LossWeights zero;
  zero.yaw = zero.uncertainty = zero.kl = 0.0;
  l = composite_loss(samples, truth, stds, weights, zero);
  CHECK(l.total == position_yaw_loss(samples, truth).pos);
  l = composite_loss(samples, truth, stds, weights, w);
  const auto py = position_yaw_loss(samples, truth);
  const double unc = 0.5 * (uncertainty_loss(stds[0]) + uncertainty_loss(stds[1]));
  const double kl = kl_categorical_uniform(weights[0]);
  CHECK(l.total == doctest::Approx(py.pos + w.yaw * py.yaw + w.uncertainty * unc + w.kl * kl).epsilon(1e-14));
}

TEST_CASE("composite_loss is invariant to sample order") {
  Rng rng(4);
  const Trajectory gt = line(3, 0, 0, 0);
  std::vector<TrajectorySample> s;
  for (int k = 0; k < 4; ++k) s.push_back(sample_of(line(3, rng.normal(), rng.normal(), rng.normal())));
  auto r = s;
  std::swap(r[0], r[3]);
  std::swap(r[1], r[2]);
  const std::vector<std::vector<double>> sd{{1.0, 2.0}}, w{{0.5, 0.5}};
  CHECK(composite_loss({s}, {gt}, sd, w, {}).total ==
        doctest::Approx(composite_loss({r}, {gt}, sd, w, {}).total).epsilon(1e-15));
}

TEST_CASE("item_loss matches the plain composite on the same samples") {
  Rng rng(5);
  const auto cfg = fixtures::toy_model_config(FrameInput::kFeatures);
  ParameterStore store;
  const auto model = TrajectoryModel::create(store, cfg, rng);
  const auto ex = fixtures::toy_example(cfg, rng);
  Tape tape(store);
  const auto out = model.forward(tape, ex.window, causal::Mode::kTrain, &rng);
  const auto y = draw_samples(out.mixture, 3, rng);
  const auto lv = item_loss(y, ex.future, out.mixture, LossWeights{});
  std::vector<TrajectorySample> samples(2);
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t t = 0; t < 3; ++t) {
      const auto& v = y.value();
      samples[k].trajectory.points.emplace_back(v.at(k * 3 + t, 0), v.at(k * 3 + t, 1), v.at(k * 3 + t, 2));
      samples[k].trajectory.points.back().yaw = v.at(k * 3 + t, 2);
    }
  }
  const auto& sv = out.mixture.stds.value().storage();
  const auto& wv = out.mixture.weights.value().storage();
  const auto plain = composite_loss({samples}, {ex.future}, {sv}, {wv}, LossWeights{});
  CHECK(lv.values().pos == doctest::Approx(plain.pos).epsilon(1e-13));
  CHECK(lv.values().yaw == doctest::Approx(plain.yaw).epsilon(1e-13));
  CHECK(lv.values().total == doctest::Approx(plain.total).epsilon(1e-13));
}

TEST_CASE("composite loss gradient on a toy model") {
  for (auto input : {FrameInput::kFeatures, FrameInput::kScene}) {
    Rng init(6);
    const auto cfg = fixtures::toy_model_config(input);
    ParameterStore store;
    const auto model = TrajectoryModel::create(store, cfg, init);
    const auto ex = fixtures::toy_example(cfg, init);
    TrainConfig tc;
    const auto fn = [&](Tape& tape) {
      Rng rng(77);
      return example_loss(tape, model, ex, tc, rng).total;
    };
    const auto res = tensor::finite_difference_check(fn, store);
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-5);
  }
}

TEST_CASE("sector-constrained samples around a shifted anchor") {
  Tape tape;
  auto y = tape.variable(Tensor::matrix(2, 3, {25.0, 0.0, 0.1, 3.0, 0.5, 0.2}));
  const Pose2D anchor(10.0, 0.0, 0.0);
  const auto c = constrain_samples(y, anchor, constraints::SectorSpec{});
  CHECK(c.value().at(0, 0) == doctest::Approx(20.0));
  CHECK(c.value().at(0, 2) == 0.1);
  // Behind the anchor: pulled onto the sector edge.
  CHECK(c.value().at(1, 0) > 10.0);
}

TEST_CASE("adamw_step examples") {
  ParameterStore store;
  store.add("w", Tensor::row({1.0, -2.0, 3.0}));
  SUBCASE("zero gradient without decay keeps parameters") {
    AdamW opt({1e-2, 0.9, 0.999, 1e-8, 0.0});
    store.mark_gradients_ready();
    opt.step(store);
    CHECK(store.value("w") == Tensor::row({1.0, -2.0, 3.0}));
  }
  SUBCASE("zero gradient with decay scales parameters") {
    AdamW opt({1e-2, 0.9, 0.999, 1e-8, 0.5});
    store.mark_gradients_ready();
    opt.step(store);
    CHECK(store.value("w")[1] == -2.0 * (1 - 1e-2 * 0.5));
  }
  SUBCASE("missing gradients") {
    AdamW opt;
    CHECK_THROWS_AS(opt.step(store), StateError);
  }
}

TEST_CASE("adamw scalar recurrence") {
  ParameterStore store;
  store.add("p", Tensor::scalar(0.5));
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01, g = 0.3;
  AdamW opt({lr, b1, b2, eps, wd});
  double p = 0.5, m = 0, v = 0;
  for (int t = 1; t <= 3; ++t) {
    store.grad("p")[0] = g;
    store.mark_gradients_ready();
    opt.step(store);
    p -= lr * wd * p;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    p -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    CHECK(store.value("p")[0] == doctest::Approx(p).epsilon(1e-15));
  }
}

TEST_CASE("augment_ego") {
  Rng rng(7);
  const auto s = fixtures::random_scene(rng, 2, 2, 1);
  CHECK(augment_ego(s, 0.0, rng) == s);
  Rng a(8), b(8);
  const auto shifted = augment_ego(s, 2.0, a);
  const Point2 off = scene::draw_anchor_offset(2.0, b);
  CHECK(shifted == scene::shift_scene(s, off));
  for (std::size_t r = 0; r < s.agents[0].rows(); ++r) {
    CHECK(shifted.agents[0].at(r, 0) == s.agents[0].at(r, 0) - off.x);
    CHECK(shifted.agents[1].at(r, 1) == s.agents[1].at(r, 1) - off.y);
  }
  Rng mc(9);
  double sx = 0, sy = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Point2 o = scene::draw_anchor_offset(2.0, mc);
    sx += o.x * o.x;
    sy += o.y * o.y;
  }
  CHECK(std::sqrt(sx / n) == doctest::Approx(2.0).epsilon(0.02));
  CHECK(std::sqrt(sy / n) == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("shift_example moves every frame rigidly") {
  Rng rng(10);
  const auto cfg = fixtures::toy_model_config(FrameInput::kScene);
  const auto e = fixtures::toy_example(cfg, rng);
  const auto s = shift_example(e, {1.0, -2.0});
  CHECK(s.future.points[1].x == e.future.points[1].x - 1.0);
  CHECK(s.start.pose.y == 2.0);
  CHECK(s.window.scenes[2] == scene::shift_scene(e.window.scenes[2], {1.0, -2.0}));
}

TEST_CASE("train") {
  Rng rng(11);
  const auto cfg = fixtures::toy_model_config(FrameInput::kFeatures);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 4; ++i) ex.push_back(fixtures::toy_example(cfg, rng));
  const ListDataset data(ex);
  TrainConfig tc;
  tc.batch_size = 2;
  tc.seed = 5;

  SUBCASE("zero learning rate leaves parameters unchanged") {
    Rng init(1);
    ParameterStore store;
    const auto model = TrajectoryModel::create(store, cfg, init);
    const ParameterStore before = store;
    tc.iterations = 1;
    tc.learning_rate = 0.0;
    train(model, store, data, tc);
    for (std::size_t i = 0; i < store.size(); ++i) {
      CHECK(store.entries()[i].value == before.entries()[i].value);
    }
  }
  SUBCASE("bitwise reproducible") {
    tc.iterations = 10;
    std::vector<std::string> csv;
    std::vector<ParameterStore> finals;
    for (int run = 0; run < 2; ++run) {
      Rng init(1);
      ParameterStore store;
      const auto model = TrajectoryModel::create(store, cfg, init);
      const auto res = train(model, store, data, tc);
      std::ostringstream os;
      write_loss_csv(os, res.history);
      csv.push_back(os.str());
      finals.push_back(store);
    }
    CHECK(csv[0] == csv[1]);
    for (std::size_t i = 0; i < finals[0].size(); ++i) {
      CHECK(finals[0].entries()[i].value == finals[1].entries()[i].value);
    }
    CHECK(csv[0].rfind("iteration,total,L_pos,L_yaw,L_unc,L_KL\n", 0) == 0);
  }
  SUBCASE("smoothed target trains") {
    tc.iterations = 2;
    tc.loss_target = LossTarget::kSmoothed;
    Rng init(1);
    ParameterStore store;
    const auto model = TrajectoryModel::create(store, cfg, init);
    const auto res = train(model, store, data, tc);
    CHECK(std::isfinite(res.history.back().loss.total));
  }
  SUBCASE("invalid config") {
    Rng init(1);
    ParameterStore store;
    const auto model = TrajectoryModel::create(store, cfg, init);
    tc.iterations = 0;
    CHECK_THROWS_AS(train(model, store, data, tc), DomainError);
    tc.iterations = 1;
    CHECK_THROWS_AS(train(model, store, ListDataset({}), tc), DomainError);
  }
}

TEST_CASE("non-finite loss aborts with the iteration") {
  Rng rng(12);
  const auto cfg = fixtures::toy_model_config(FrameInput::kFeatures);
  auto e = fixtures::toy_example(cfg, rng);
  e.future.points[0].x = std::nan("");
  const ListDataset data({e});
  Rng init(1);
  ParameterStore store;
  const auto model = TrajectoryModel::create(store, cfg, init);
  TrainConfig tc;
  tc.iterations = 3;
  tc.batch_size = 1;
  try {
    train(model, store, data, tc);
    FAIL("expected an exception");
  } catch (const DomainError& err) {
    CHECK(std::string(err.what()).find("iteration 0") != std::string::npos);
  }
}

TEST_CASE("model config validation") {
  auto cfg = fixtures::toy_model_config(FrameInput::kScene);
  cfg.head.d_model = 16;
  CHECK_THROWS_AS(cfg.validate(), DimensionError);
  cfg = fixtures::toy_model_config(FrameInput::kFeatures);
  cfg.head.mixtures = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("optional latent KL term") {
  Rng init(8);
  const auto cfg = fixtures::toy_model_config(FrameInput::kFeatures);
  ParameterStore store;
  const auto model = TrajectoryModel::create(store, cfg, init);
  const auto ex = fixtures::toy_example(cfg, init);
  TrainConfig off;
  TrainConfig on;
  on.loss.latent_kl = 0.5;
  Rng r1(3), r2(3), r3(3);
  Tape t1(store), t2(store), t3(store);
  const double base = example_loss(t1, model, ex, off, r1).total.value()[0];
  const double with = example_loss(t2, model, ex, on, r2).total.value()[0];
  tensor::DropoutContext dropout{cfg.dropout, &r3};
  const auto out = model.forward(t3, ex.window, causal::Mode::kTrain, &r3, &dropout);
  const double kl = head::latent_kl_standard_normal(out.latent).value()[0];
  CHECK(kl > 0.0);
  CHECK(with - base == doctest::Approx(0.5 * kl).epsilon(1e-10));
  const auto fn = [&](Tape& tape) {
    Rng rng(5);
    return example_loss(tape, model, ex, on, rng).total;
  };
  CHECK(tensor::finite_difference_check(fn, store).max_rel_error < 1e-5);
  on.loss.latent_kl = -1.0;
  CHECK_THROWS(on.validate());
}
