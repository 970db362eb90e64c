#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "helpers.hpp"
#include "ntkmmd/calibration.hpp"
#include "ntkmmd/error.hpp"
#include "ntkmmd/kernels.hpp"

using namespace ntkmmd;

namespace {

std::vector<Label> labels_of(int nx, int ny) {
  std::vector<Label> l(static_cast<std::size_t>(nx), Label::x);
  l.insert(l.end(), static_cast<std::size_t>(ny), Label::y);
  return l;
}

}  // namespace

TEST_CASE("empirical quantile convention") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(empirical_quantile(v, 0.95) == 96.0);
  CHECK(empirical_quantile(std::vector<double>{5.0}, 0.3) == 5.0);
  CHECK(empirical_quantile(std::vector<double>{5.0}, 0.99) == 5.0);
  CHECK(empirical_quantile(std::vector<double>{4.0, 2.0, 3.0, 1.0}, 0.5) == 3.0);
  std::vector<double> shuffled{3, 1, 4, 1, 5, 9, 2, 6};
  auto sorted = shuffled;
  std::sort(sorted.begin(), sorted.end());
  CHECK(empirical_quantile(shuffled, 0.8) == empirical_quantile(sorted, 0.8));
  CHECK_THROWS_AS(empirical_quantile(std::vector<double>{}, 0.5), InputError);
}

TEST_CASE("test-only bootstrap on two points") {
  const Vector g{{1.0, 0.0}};
  const auto r = bootstrap_test_only(g, labels_of(1, 1), 200, 0.05, 1);
  for (double v : r.null_samples) CHECK((v == 1.0 || v == -1.0));
  CHECK(std::count(r.null_samples.begin(), r.null_samples.end(), 1.0) > 50);
  CHECK(std::count(r.null_samples.begin(), r.null_samples.end(), -1.0) > 50);
}

TEST_CASE("test-only bootstrap with constant witness") {
  const auto r = bootstrap_test_only(Vector::Constant(6, 2.5), labels_of(3, 3), 50, 0.05, 2);
  for (double v : r.null_samples) CHECK(v == 0.0);
  CHECK(r.threshold == 0.0);
  CHECK(r.mode == BootstrapMode::test_only);
}

TEST_CASE("bootstrap draws do not depend on the thread count") {
  const Vector g = Vector::LinSpaced(10, -1.0, 2.0);
  const auto a = bootstrap_test_only(g, labels_of(4, 6), 300, 0.05, 3, 1);
  const auto b = bootstrap_test_only(g, labels_of(4, 6), 300, 0.05, 3, 4);
  CHECK(a.null_samples == b.null_samples);
}

TEST_CASE("full-gram bootstrap") {
  const SampleMatrix z = testing::normal_samples(6, 2, 9);
  const auto layout = symmetric_layout(3, 3);
  SUBCASE("identity draw reproduces the observed statistic") {
    const GramBlock g = gram(make_gaussian(1.0), z, z);
    FullGramOptions opt;
    opt.include_identity = true;
    const auto r = bootstrap_full_gram(g, layout, 20, 0.05, 4, opt);
    const TwoSample s{z.topRows(3), z.bottomRows(3)};
    CHECK(r.null_samples[0] == doctest::Approx(mmd2_biased(make_gaussian(1.0), s)).epsilon(1e-12));
    CHECK(pooled_statistic(g, layout) == doctest::Approx(mmd2_biased(make_gaussian(1.0), s)).epsilon(1e-12));
  }
  SUBCASE("constant kernel gives zero nulls") {
    const GramBlock g{Matrix::Ones(6, 6)};
    for (double v : bootstrap_full_gram(g, layout, 30, 0.05, 5).null_samples) CHECK(v == doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("Monte Carlo matches enumeration for n = 6") {
    const GramBlock g = gram(make_gaussian(0.8), z, z);
    std::map<long long, double> expected;
    auto key = [](double v) { return std::llround(v * 1e9); };
    for (int mask = 0; mask < 64; ++mask) {
      if (__builtin_popcount(static_cast<unsigned>(mask)) != 3) continue;
      PooledLayout l;
      for (int i = 0; i < 6; ++i) l.labels.push_back((mask >> i) & 1 ? Label::x : Label::y);
      expected[key(pooled_statistic(g, l))] += 1.0 / 20.0;
    }
    const auto r = bootstrap_full_gram(g, layout, 20000, 0.05, 6);
    std::map<long long, double> observed;
    for (double v : r.null_samples) {
      REQUIRE(expected.count(key(v)));
      observed[key(v)] += 1.0 / 20000.0;
    }
    for (const auto& [k, p] : expected) CHECK(std::abs(observed[k] - p) < 4.5 * std::sqrt(p * (1 - p) / 20000.0));
  }
}

TEST_CASE("test-only and full-gram agree on test-label permutations") {
  const TwoSample data{testing::normal_samples(8, 2, 10), testing::normal_samples(8, 2, 11, 0.5)};
  const auto split = split_two_sample(data, 0.5, 12);
  const SampleMatrix pooled = pooled_rows(split);
  const GramBlock g = gram(make_gaussian(1.0), pooled, pooled);
  const auto layout = split_layout(split);
  const Vector w = pooled_witness(g, layout);
  std::vector<Label> test_labels;
  for (std::size_t i = 0; i < layout.labels.size(); ++i)
    if (layout.roles[i] == Role::test) test_labels.push_back(layout.labels[i]);
  REQUIRE(static_cast<Eigen::Index>(test_labels.size()) == w.size());
  FullGramOptions opt;
  opt.scope = PermutationScope::test_only;
  const auto a = bootstrap_full_gram(g, layout, 100, 0.1, 13, opt);
  const auto b = bootstrap_test_only(w, test_labels, 100, 0.1, 13);
  CHECK(a.null_samples == b.null_samples);
  CHECK(a.threshold == b.threshold);
  CHECK(pooled_statistic(g, layout) ==
        doctest::Approx(mmd2_asymmetric(make_gaussian(1.0), split)).epsilon(1e-12));
}

TEST_CASE("full-retrain bootstrap") {
  const TwoSample data{testing::normal_samples(10, 2, 14), testing::normal_samples(10, 2, 15, 1.0)};
  const NetworkConfig net{2, {32}};
  TrainConfig train;
  RetrainOptions opt;
  opt.include_identity = true;
  const auto r = bootstrap_full_retrain(data, 0.5, net, train, 1, 0.05, 16, opt);
  REQUIRE(r.null_samples.size() == 1);
  const auto again = bootstrap_full_retrain(data, 0.5, net, train, 1, 0.05, 16, opt);
  CHECK(r.null_samples == again.null_samples);
  CHECK(r.training_samples == 10);
  CHECK(r.mode == BootstrapMode::full_retrain);
}

TEST_CASE("full-retrain and full-gram thresholds agree at small rates") {
  const TwoSample data{testing::normal_samples(40, 2, 17), testing::normal_samples(40, 2, 18)};
  const auto split = split_two_sample(data, 0.5, 19);
  const auto theta0 = init_params(NetworkConfig{2, {256}}, 20);
  TrainConfig train;
  train.learning_rate = 0.1;
  const auto retrain = bootstrap_full_retrain(split, theta0, train, 200, 0.1, 21);
  const SampleMatrix pooled = pooled_rows(split);
  const auto gram_r = bootstrap_full_gram(gram(make_ntk(theta0), pooled, pooled), split_layout(split), 200, 0.1, 21);
  CHECK(std::abs(retrain.threshold - gram_r.threshold) <= 0.1 * std::abs(gram_r.threshold));
}

TEST_CASE("estimate_nu") {
  const GaussianKernel wide{1e12};
  const TwoSample s{testing::normal_samples(3, 2, 22), testing::normal_samples(3, 2, 23)};
  const auto ones = estimate_nu(KernelSpec{wide}, s);
  CHECK(ones.pp == doctest::Approx(1.0));
  CHECK(ones.pq == doctest::Approx(1.0));
  CHECK(ones.qq == doctest::Approx(1.0));
  CHECK(ones.max == doctest::Approx(1.0));

  const SampleMatrix two{{0.0}, {std::sqrt(2.0 * std::log(2.0))}};
  CHECK(estimate_nu(make_gaussian(1.0), TwoSample{two, SampleMatrix{{0.0}, {1.0}}}).pp == doctest::Approx(0.25));

  const TwoSample far{testing::normal_samples(5, 2, 24, 50.0), testing::normal_samples(5, 2, 25, -50.0)};
  CHECK(estimate_nu(make_gaussian(1.0), far).pq < 1e-12);
}

TEST_CASE("theoretical thresholds") {
  ThresholdParams tp;
  tp.n = 400;
  tp.c = 0.5;
  tp.nu = 1.0;
  CHECK(theoretical_threshold(tp) == doctest::Approx(1.6947).epsilon(1e-4));
  tp.variant = ThresholdVariant::thm3;
  tp.c = 0.25;
  CHECK(theoretical_threshold(tp) == doctest::Approx(2.3684).epsilon(1e-4));

  tp.nu = 1e-300;
  tp.c = 0.5;
  CHECK(theoretical_threshold(tp) < 1e-140);
  tp.variant = ThresholdVariant::thm2;
  CHECK(theoretical_threshold(tp) < 1e-140);
  tp.variant = ThresholdVariant::thm1;
  CHECK(theoretical_threshold(tp) == doctest::Approx(4.0 / 200.0));

  for (auto v : {ThresholdVariant::thm1, ThresholdVariant::thm2, ThresholdVariant::thm3}) {
    ThresholdParams base;
    base.variant = v;
    base.n = 300;
    double prev = 0.0;
    for (double nu : {0.1, 0.4, 0.9}) {
      base.nu = nu;
      const double t = theoretical_threshold(base);
      CHECK(t >= prev);
      prev = t;
    }
    base.nu = 0.5;
    ThresholdParams other = base;
    other.alpha_level = 0.01;
    CHECK(theoretical_threshold(other) >= theoretical_threshold(base));
    other = base;
    other.n = 600;
    CHECK(theoretical_threshold(other) <= theoretical_threshold(base));
    other = base;
    other.c = 0.8;
    CHECK(theoretical_threshold(other) <= theoretical_threshold(base));
  }
  tp.c = 1.5;
  CHECK_THROWS_AS(tp.validate(), InputError);
  CHECK_THROWS_AS(parse_threshold_variant("thm4"), InputError);
}
