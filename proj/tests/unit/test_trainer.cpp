#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ntkmmd/bench.hpp"
#include "ntkmmd/error.hpp"
#include "ntkmmd/kernels.hpp"
#include "ntkmmd/mmd.hpp"
#include "ntkmmd/trainer.hpp"

using namespace ntkmmd;

namespace {

TrainConfig given_order(double lr) {
  TrainConfig c;
  c.learning_rate = lr;
  c.order = SampleOrder::given;
  return c;
}

}  // namespace

TEST_CASE("objective closed forms") {
  const auto p = init_params(NetworkConfig{2, {8}}, 61);
  const SampleMatrix a = testing::normal_samples(4, 2, 62);
  CHECK(objective(p, TwoSample{a, a}) == doctest::Approx(0.0).scale(1.0));
  const SampleMatrix x = a.topRows(1), y = a.bottomRows(1);
  CHECK(objective(p, TwoSample{x, y}) ==
        doctest::Approx(forward(p, y.row(0).transpose()) - forward(p, x.row(0).transpose())));
  const auto flat = testing::single_unit(1.5, Vector::Zero(2), 0.0, Activation::softplus);
  CHECK(objective(flat, TwoSample{x, testing::normal_samples(3, 2, 63)}) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("one SGD step on an X sample follows the closed form") {
  const auto p0 = init_params(NetworkConfig{3, {16}}, 64);
  const TwoSample s{testing::normal_samples(4, 3, 65), testing::normal_samples(4, 3, 66)};
  TrainConfig cfg = given_order(0.3);
  cfg.max_samples = 1;
  const auto tp = train_online(p0, s, cfg);
  const Vector z = s.x.row(0).transpose();
  const Vector expected = p0.flatten_trainable() + (0.3 / 4.0) * param_gradient(p0, z);
  CHECK((tp.final.flatten_trainable() - expected).norm() < 1e-14);
  CHECK(tp.samples_seen == 1);
  CHECK(tp.steps == 1);
}

TEST_CASE("full-batch descent on identical samples leaves the network unchanged") {
  const auto p0 = init_params(NetworkConfig{3, {16}}, 67);
  const SampleMatrix a = testing::normal_samples(5, 3, 68);
  TrainConfig cfg = given_order(0.5);
  cfg.batch_size = 10;
  cfg.epochs = 3;
  const auto tp = train_online(p0, TwoSample{a, a}, cfg);
  CHECK((tp.final.flatten_trainable() - p0.flatten_trainable()).norm() < 1e-14);
  CHECK(tp.scale == doctest::Approx(1.5));
  CHECK(tp.steps == 3);
}

TEST_CASE("one-step witness approximates the NTK at initialization") {
  const auto p0 = init_params(NetworkConfig{3, {64}}, 69);
  const TwoSample s{testing::normal_samples(5, 3, 70), testing::normal_samples(5, 3, 71)};
  const Vector z = s.x.row(0).transpose();
  const auto k = make_ntk(p0);
  Rng rng = make_rng(72);
  const Vector q = testing::normal_vector(3, rng);
  const double target = kernel_pair(k, q, z) / 5.0;
  double prev = 0.0;
  for (double lr : {1e-2, 1e-3}) {
    TrainConfig cfg = given_order(lr);
    cfg.max_samples = 1;
    const double err = std::abs(witness_net(train_online(p0, s, cfg), q) - target);
    if (prev > 0.0) CHECK(err < 0.2 * prev);
    prev = err;
  }
  CHECK(prev < 1e-3 * std::abs(target) + 1e-9);
}

TEST_CASE("small learning rate witness matches the exact NTK witness") {
  const auto p0 = init_params(NetworkConfig{4, {128}}, 73);
  const TwoSample train{testing::normal_samples(20, 4, 74), testing::normal_samples(20, 4, 75, 0.4)};
  const SampleMatrix q = testing::normal_samples(10, 4, 76);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.order_seed = 77;
  const auto tp = train_online(p0, train, cfg);
  const Vector net = witness_net_batch(tp, q);
  const Vector exact = witness_exact_batch(make_ntk(p0), train, q);
  CHECK((net - exact).cwiseAbs().maxCoeff() <= 1e-2 * exact.cwiseAbs().maxCoeff());
}

TEST_CASE("t_net on the training set is the objective decrease over scale") {
  const auto p0 = init_params(NetworkConfig{3, {32}}, 78);
  const TwoSample s{testing::normal_samples(10, 3, 79), testing::normal_samples(12, 3, 80, 0.5)};
  TrainConfig cfg;
  cfg.learning_rate = 0.2;
  cfg.order_seed = 81;
  const auto tp = train_online(p0, s, cfg);
  CHECK(t_net(tp, s) ==
        doctest::Approx((objective(p0, s) - objective(tp.final, s)) / tp.scale).epsilon(1e-10));
  TrainedPair still = tp;
  still.final = still.initial;
  CHECK(t_net(still, s) == 0.0);
  CHECK(witness_net(still, s.x.row(0).transpose()) == 0.0);
}

TEST_CASE("checkpoints are prefix consistent") {
  const auto p0 = init_params(NetworkConfig{3, {16}}, 82);
  const TwoSample s{testing::normal_samples(15, 3, 83), testing::normal_samples(15, 3, 84, 0.2)};
  TrainConfig cfg;
  cfg.order_seed = 85;
  cfg.checkpoint_every = 10;
  std::vector<std::pair<std::size_t, Vector>> seen;
  train_online(p0, s, cfg, [&](std::size_t n, const NetworkParams& p) { seen.emplace_back(n, p.flatten_trainable()); });
  REQUIRE(seen.size() == 3);
  for (const auto& [n, theta] : seen) {
    TrainConfig prefix = cfg;
    prefix.checkpoint_every = 0;
    prefix.max_samples = n;
    CHECK(train_online(p0, s, prefix).final.flatten_trainable() == theta);
  }
}

TEST_CASE("lazy regime: parameters barely move") {
  ShiftSpec spec{ShiftKind::cov_shift, 0.12, 100, 100, 100, 86};
  const auto data = generate(spec);
  const auto p0 = init_params(NetworkConfig{100, {512}}, 87);
  TrainConfig cfg;
  cfg.order_seed = 88;
  const auto tp = train_online(p0, data, cfg);
  CHECK(trainable_distance(tp.final, p0) / trainable_norm(p0) < 0.05);
}

TEST_CASE("batch size 20 gives nearly the same statistic") {
  ShiftSpec spec{ShiftKind::cov_shift, 0.16, 100, 100, 100, 89};
  const auto data = generate(spec);
  const auto p0 = init_params(NetworkConfig{100, {512}}, 90);
  TrainConfig one;
  one.order_seed = 91;
  TrainConfig twenty = one;
  twenty.batch_size = 20;
  const double a = t_net(train_online(p0, data, one), data);
  const double b = t_net(train_online(p0, data, twenty), data);
  CHECK(std::abs(a - b) <= 0.1 * std::abs(a));
}

TEST_CASE("divergence is reported with the step") {
  const auto p0 = init_params(NetworkConfig{2, {4}}, 92);
  const TwoSample s{SampleMatrix::Constant(2, 2, 1e200), SampleMatrix::Constant(2, 2, -1e200)};
  TrainConfig cfg = given_order(1e200);
  CHECK_THROWS_AS(train_online(p0, s, cfg), DivergenceError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = {};
  c.momentum = 1.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
}
