#include <cmath>

#include "doctest.h"
#include "trajmix/core/errors.hpp"
#include "trajmix/sim/closed_loop.hpp"

using namespace trajmix;
using namespace trajmix::sim;

namespace {

Trajectory straight(std::size_t n, double dt, double v) {
  Trajectory t;
  t.dt = dt;
  for (std::size_t i = 0; i < n; ++i) t.points.emplace_back(v * dt * i, 0.0, 0.0);
  return t;
}

training::ModelConfig ring_model_config() {
  training::ModelConfig mc;
  mc.input = training::FrameInput::kFeatures;
  mc.feature_dim = kRingFeatureDim;
  mc.causal.d_model = 8;
  mc.causal.heads = 2;
  mc.causal.layers = 1;
  mc.causal.causal_len = 4;
  mc.causal.interval = 1;
  mc.head.d_model = 8;
  mc.head.mixtures = 3;
  mc.head.future_steps = 10;
  mc.head.latent_dim = 4;
  return mc;
}

}  // namespace

TEST_CASE("generate_ring_data") {
  RingScenario sc;
  Rng rng(1);
  const auto data = generate_ring_data(sc, 20, 13, 10, rng);
  REQUIRE(data.size() == 20);
  for (const auto& s : data) {
    REQUIRE(s.history.size() == 13);
    REQUIRE(s.future.size() == 10);
    std::vector<Pose2D> all = s.history;
    all.insert(all.end(), s.future.points.begin(), s.future.points.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
      const Pose2D& p = all[i];
      CHECK(std::abs(std::hypot(p.x, p.y) - sc.radius) < 1e-9);
      CHECK(std::abs(p.x * std::cos(p.yaw) + p.y * std::sin(p.yaw)) < 1e-9);
      if (i > 0) {
        const double chord = std::hypot(p.x - all[i - 1].x, p.y - all[i - 1].y);
        const double arc = 2.0 * sc.radius * std::asin(chord / (2.0 * sc.radius));
        CHECK(arc == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
  RingScenario bad;
  bad.radius = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("ring_features") {
  RingScenario sc;
  Rng rng(2);
  const auto data = generate_ring_data(sc, 1, 10, 1, rng);
  const auto f = ring_features(data[0].history, sc);
  REQUIRE(f.size() == 32);
  CHECK(std::abs(f[30]) < 1e-9);
  CHECK(std::abs(f[31]) < 1e-9);
  CHECK(std::abs(f[27]) < 1e-12);
  CHECK(std::abs(f[28]) < 1e-12);
  CHECK(f[0] < -8.0);  // oldest pose nine metres behind

  std::vector<Pose2D> still(10, Pose2D(0, 0, 0));
  const auto z = ring_features(still, sc);
  for (std::size_t i = 0; i < 30; ++i) CHECK(z[i] == 0.0);
  CHECK(z[30] == doctest::Approx(50.0));
  CHECK_THROWS_AS(ring_features(std::vector<Pose2D>(9), sc), DimensionError);
}

TEST_CASE("ring_window anchors every frame at the newest pose") {
  RingScenario sc;
  Rng rng(3);
  const auto data = generate_ring_data(sc, 1, 13, 1, rng);
  const auto w = ring_window(data[0].history, sc, 4, 1);
  REQUIRE(w.features.size() == 4);
  const std::vector<Pose2D> last(data[0].history.begin() + 3, data[0].history.end());
  CHECK(w.features.back() == ring_features(last, sc));
  const std::vector<Pose2D> first(data[0].history.begin(), data[0].history.begin() + 10);
  CHECK(w.features.front() == ring_features(first, sc, data[0].history.back()));
}

TEST_CASE("ring_start_state and dataset examples") {
  RingScenario sc;
  Rng rng(4);
  const auto data = generate_ring_data(sc, 8, 13, 10, rng);
  const auto s = ring_start_state(data[0].history, sc);
  CHECK(s.vx == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(s.yaw_rate == doctest::Approx(0.02).epsilon(1e-9));
  CHECK(s.pose == Pose2D());

  const RingDataset ds(sc, data, 4, 1);
  Rng a(5);
  const auto e = ds.example(0, 0.0, a);
  REQUIRE(e.future.size() == 10);
  const auto local_truth = transform_to_ego(data[0].history.back(), data[0].future);
  for (std::size_t t = 0; t < 10; ++t) {
    CHECK(e.future.points[t].x == doctest::Approx(local_truth.points[t].x).epsilon(1e-9));
    CHECK(e.future.points[t].y == doctest::Approx(local_truth.points[t].y).scale(1.0).epsilon(1e-9));
  }
  // Displaced history: the target lies on the circle and features see the offset.
  Rng b(6);
  const auto d = ds.example(0, 2.0, b);
  const Pose2D cur = data[0].history.back();
  Rng c(6);
  const double dx = c.normal(0, 2.0), dy = c.normal(0, 2.0);
  const Pose2D moved(cur.x + dx, cur.y + dy, cur.yaw);
  for (const Pose2D& p : transform_to_world(moved, d.future).points) {
    CHECK(std::abs(std::hypot(p.x, p.y) - sc.radius) < 1e-9);
  }
  const Point2 near = world_to_ego(moved, sc.nearest_point({moved.x, moved.y}));
  CHECK(d.window.features.back()[30] == doctest::Approx(near.x));
  CHECK(d.window.features.back()[31] == doctest::Approx(near.y));
}

TEST_CASE("offroad_rate") {
  const CirclePath path{{0, 0}, 50.0};
  RingScenario sc;
  Trajectory on, off;
  for (int i = 0; i < 20; ++i) {
    const Pose2D p = sc.pose_at(0.02 * i);
    on.points.push_back(p);
    off.points.emplace_back(p.x * 53.0 / 50.0, p.y * 53.0 / 50.0, p.yaw);
  }
  CHECK(offroad_rate({on, on}, path) == 0.0);
  CHECK(offroad_rate({off, off}, path) == 1.0);
  Trajectory small = on;
  small.points[5].x += 1.5;
  CHECK(offroad_rate({on, off, small, off}, path) == 0.5);
}

TEST_CASE("discomfort_rate") {
  RingScenario sc;
  Trajectory circle;
  circle.dt = 1.0;
  for (int i = 0; i < 100; ++i) circle.points.push_back(sc.pose_at(0.02 * i));
  const auto acc = accelerations(circle);
  CHECK(acc[10] == doctest::Approx(0.02).epsilon(1e-3));
  CHECK(discomfort_rate(circle) == 0.0);
  CHECK(discomfort_rate(straight(10, 0.1, 0.0)) == 0.0);

  Trajectory kink;
  kink.dt = 1.0;
  const int n = 12, j = 5;
  for (int t = 0; t < n; ++t) kink.points.emplace_back(t <= j ? t : j + 5.0 * (t - j), 0.0, 0.0);
  CHECK(discomfort_rate(kink) == doctest::Approx(1.0 / (n - 2)));
  CHECK_THROWS_AS(discomfort_rate(straight(2, 1.0, 1.0)), DomainError);
}

TEST_CASE("l2_error") {
  const Trajectory a = straight(5, 1.0, 1.0);
  CHECK(l2_error(a, a) == 0.0);
  Trajectory b = a;
  for (auto& p : b.points) {
    p.x += 3.0;
    p.y += 4.0;
  }
  CHECK(l2_error(a, b) == doctest::Approx(5.0));
  Rng rng(7);
  Trajectory c = a, d = a;
  double acc = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    c.points[i].x = rng.normal();
    d.points[i].y = rng.normal();
    acc += std::hypot(c.points[i].x - d.points[i].x, c.points[i].y - d.points[i].y);
  }
  CHECK(l2_error(c, d) == doctest::Approx(acc / 5).epsilon(1e-15));
  // Shifting both arguments together leaves every metric unchanged.
  Trajectory cs = c, ds = d;
  for (auto* t : {&cs, &ds}) {
    for (auto& p : t->points) {
      p.x += 7.0;
      p.y -= 2.0;
    }
  }
  CHECK(l2_error(cs, ds) == doctest::Approx(l2_error(c, d)).epsilon(1e-14));
  CHECK(discomfort_rate(cs) == discomfort_rate(c));
  CHECK_THROWS_AS(l2_error(a, straight(4, 1.0, 1.0)), DimensionError);
}

TEST_CASE("closed loop with an oracle stays on the circle") {
  RingScenario sc;
  ClosedLoopConfig cl;
  cl.n_steps = 30;
  const auto rs = run_rollouts(oracle_predictor(sc, 6, 10), sc, cl, 2, 9);
  const CirclePath path{{0, 0}, sc.radius};
  for (const auto& r : rs) {
    REQUIRE(r.executed.size() == 30);
    for (const auto& p : r.executed.points) CHECK(path.deviation({p.x, p.y}) < 0.05);
  }
  const auto m = evaluate_rollouts(rs, sc);
  CHECK(m.offroad_rate == 0.0);
  CHECK(m.l2_error < 0.05);
  CHECK(m.n_rollouts == 2);
}

TEST_CASE("closed loop with an untrained model is finite and deterministic") {
  RingScenario sc;
  Rng init(10);
  tensor::ParameterStore store;
  const auto model = training::TrajectoryModel::create(store, ring_model_config(), init);
  ClosedLoopConfig cl;
  cl.n_steps = 100;
  const auto a = run_rollouts(model_predictor(model, store), sc, cl, 1, 11);
  const auto b = run_rollouts(model_predictor(model, store), sc, cl, 1, 11);
  REQUIRE(a[0].executed.size() == 100);
  for (const auto& p : a[0].executed.points) {
    CHECK(std::isfinite(p.x));
    CHECK(std::isfinite(p.y));
  }
  CHECK(a[0].executed == b[0].executed);
}

TEST_CASE("non-finite prediction aborts with the step") {
  RingScenario sc;
  ClosedLoopConfig cl;
  cl.n_steps = 5;
  int calls = 0;
  const auto oracle = oracle_predictor(sc, 2, 10);
  const Predictor broken = [&](const PredictionContext& ctx) {
    auto g = oracle(ctx);
    if (++calls == 3) g.means[0] = std::nan("");
    return g;
  };
  Rng rng(12);
  try {
    closed_loop_rollout(broken, sc, cl, 0.0, rng);
    FAIL("expected an exception");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("step 2") != std::string::npos);
  }
}

TEST_CASE("smoothing comparison records paired samples") {
  RingScenario sc;
  ClosedLoopConfig cl;
  cl.n_steps = 3;
  cl.keep_steps = true;
  Rng rng(13);
  const auto r = closed_loop_rollout(oracle_predictor(sc, 6, 10), sc, cl, 0.5, rng);
  REQUIRE(r.steps.size() == 3);
  CHECK(r.steps[0].smoothed.size() == r.steps[0].raw.size());
  const auto c = compare_smoothing_discomfort(r.steps);
  CHECK(c.scenes == 3);
  CHECK(c.smoothed <= c.raw);
}
