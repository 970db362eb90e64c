#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ntkmmd/bench.hpp"
#include "ntkmmd/error.hpp"

using namespace ntkmmd;

TEST_CASE("generate null and degenerate shifts") {
  ShiftSpec spec{ShiftKind::null, 0.0, 3, 50, 60, 1};
  const auto s = generate(spec);
  CHECK(s.n_x() == 50);
  CHECK(s.n_y() == 60);
  CHECK(s.dim() == 3);
  CHECK(generate(spec).y == s.y);

  ShiftSpec zero{ShiftKind::cov_shift, 0.0, 3, 50, 60, 1};
  const auto z = generate(zero);
  CHECK(z.y.allFinite());
  CHECK(std::abs(z.y.mean()) < 0.2);
}

TEST_CASE("covariance shift has covariance I + rho E") {
  ShiftSpec spec{ShiftKind::cov_shift, 0.16, 5, 10, 200000, 2};
  const auto s = generate(spec);
  const Matrix centered = s.y.rowwise() - s.y.colwise().mean();
  const Matrix cov = centered.transpose() * centered / (s.n_y() - 1.0);
  const Matrix target = Matrix::Identity(5, 5) + 0.16 * Matrix::Ones(5, 5);
  CHECK((cov - target).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("mean shift moves the first coordinate") {
  ShiftSpec spec{ShiftKind::mean_shift, 0.8, 4, 10, 100000, 3};
  const Vector mean = generate(spec).y.colwise().mean().transpose();
  CHECK(mean[0] == doctest::Approx(0.8).epsilon(0.02));
  CHECK(std::abs(mean[1]) < 0.02);
}

TEST_CASE("Hotelling T2") {
  const double s = 1.0 / std::sqrt(2.0);
  const TwoSample one{SampleMatrix{{1.0 - s}, {1.0 + s}}, SampleMatrix{{-s}, {s}}};
  CHECK(hotelling_t2(one) == doctest::Approx(1.0));

  const SampleMatrix a = testing::normal_samples(10, 3, 4);
  SampleMatrix b = testing::normal_samples(12, 3, 5);
  b.rowwise() += (a.colwise().mean() - b.colwise().mean());
  CHECK(hotelling_t2(TwoSample{a, b}) == doctest::Approx(0.0).scale(1.0));

  const TwoSample r{testing::normal_samples(15, 3, 6), testing::normal_samples(11, 3, 7, 0.4)};
  const Matrix map{{2.0, 0.5, 0.0}, {-1.0, 1.0, 0.3}, {0.2, 0.0, 3.0}};
  const Eigen::RowVectorXd shift{{1.0, -2.0, 5.0}};
  const TwoSample mapped{(r.x * map.transpose()).rowwise() + shift, (r.y * map.transpose()).rowwise() + shift};
  CHECK(hotelling_t2(mapped) == doctest::Approx(hotelling_t2(r)).epsilon(1e-9));

  CHECK_THROWS_AS(hotelling_t2(TwoSample{testing::normal_samples(2, 3, 8), testing::normal_samples(2, 3, 9)}),
                  InputError);
}

TEST_CASE("run_test on identical samples does not reject") {
  const SampleMatrix a = testing::normal_samples(30, 3, 10);
  for (Method m : {Method::ntk_net, Method::ntk_exact, Method::gaussian_mmd, Method::hotelling}) {
    RunConfig cfg;
    cfg.method = m;
    cfg.network.hidden_widths = {32};
    cfg.n_boot = 100;
    cfg.alpha_level = 0.2;
    if (m == Method::ntk_net || m == Method::ntk_exact) cfg.calibration = Calibration::test_only;
    const auto out = run_test(TwoSample{a, a}, cfg, 11);
    CHECK(out.statistic == doctest::Approx(0.0).scale(1.0));
    CHECK_FALSE(out.reject);
  }
}

TEST_CASE("run_test: network and exact NTK decisions agree at small rates") {
  int agree = 0;
  for (std::uint64_t r = 0; r < 40; ++r) {
    ShiftSpec spec{ShiftKind::cov_shift, 0.3, 10, 40, 40, 100 + r};
    const auto data = generate(spec);
    RunConfig cfg;
    cfg.alpha_level = 0.1;
    cfg.n_boot = 100;
    cfg.network.hidden_widths = {128};
    cfg.train.learning_rate = 1e-3;
    cfg.calibration = Calibration::test_only;
    cfg.method = Method::ntk_net;
    const bool a = run_test(data, cfg, 200 + r).reject;
    cfg.method = Method::ntk_exact;
    const bool b = run_test(data, cfg, 200 + r).reject;
    agree += a == b ? 1 : 0;
  }
  CHECK(agree >= 38);
}

TEST_CASE("calibration resolution") {
  CHECK(resolve_calibration(Method::ntk_net, Calibration::automatic) == Calibration::test_only);
  CHECK(resolve_calibration(Method::ntk_exact, Calibration::full_gram) == Calibration::full_gram);
  CHECK(resolve_calibration(Method::gaussian_mmd, Calibration::automatic) == Calibration::full_gram);
  CHECK(resolve_calibration(Method::hotelling, Calibration::automatic) == Calibration::permutation);
  CHECK_THROWS_AS(resolve_calibration(Method::hotelling, Calibration::full_retrain), InputError);
  CHECK(parse_method("ntk-net") == Method::ntk_net);
  CHECK_THROWS_AS(parse_method("c2st"), InputError);
}

TEST_CASE("Wilson interval") {
  const auto [lo, hi] = wilson_interval(25, 500);
  CHECK(lo == doctest::Approx(0.034).epsilon(0.02));
  CHECK(hi == doctest::Approx(0.0728).epsilon(0.02));
  const auto zero = wilson_interval(0, 10);
  CHECK(zero.first == 0.0);
  CHECK(zero.second > 0.0);
  CHECK(wilson_interval(10, 10).second == 1.0);
}

TEST_CASE("estimate_power is reproducible for any thread count") {
  ShiftSpec spec{ShiftKind::mean_shift, 0.5, 3, 20, 20, 0};
  RunConfig cfg;
  cfg.method = Method::gaussian_mmd;
  cfg.n_boot = 50;
  cfg.threads = 1;
  const auto a = estimate_power(spec, cfg, 12, 12);
  cfg.threads = 3;
  const auto b = estimate_power(spec, cfg, 12, 12);
  REQUIRE(a.replicas.size() == b.replicas.size());
  for (std::size_t i = 0; i < a.replicas.size(); ++i) CHECK(a.replicas[i].statistic == b.replicas[i].statistic);
  CHECK(a.overall.rejections == b.overall.rejections);
}

TEST_CASE("power grows with the shift") {
  RunConfig cfg;
  cfg.method = Method::gaussian_mmd;
  cfg.n_boot = 100;
  const auto lo = estimate_power(ShiftSpec{ShiftKind::mean_shift, 0.0, 5, 30, 30, 0}, cfg, 60, 13);
  const auto hi = estimate_power(ShiftSpec{ShiftKind::mean_shift, 1.5, 5, 30, 30, 0}, cfg, 60, 13);
  CHECK(hi.overall.power > lo.overall.power);
}

TEST_CASE("learning-curve checkpoints") {
  ShiftSpec spec{ShiftKind::cov_shift, 0.5, 10, 40, 40, 0};
  RunConfig cfg;
  cfg.network.hidden_widths = {64};
  cfg.n_boot = 50;
  cfg.checkpoints = {10, 20, 40};
  const auto study = estimate_power(spec, cfg, 10, 14);
  REQUIRE(study.curve.size() == 3);
  CHECK(study.curve.back().second.rejections == study.overall.rejections);
}

TEST_CASE("error study") {
  ShiftSpec spec{ShiftKind::cov_shift, 0.2, 10, 30, 30, 15};
  NetworkShape shape;
  shape.hidden_widths = {128};
  const auto s = ntk_error_study(spec, shape, {0.4, 0.2, 0.1, 0.05, 0.025}, 16);
  REQUIRE(s.pairs.size() == 5);
  CHECK(s.slope > 0.8);
  CHECK(s.slope < 1.1);
  for (std::size_t i = 1; i < s.pairs.size(); ++i) CHECK(s.pairs[i].second <= 2.0 * s.pairs[i - 1].second);
  CHECK_THROWS_AS(ntk_error_study(spec, shape, {0.1, 0.05}, 16), InputError);
}

TEST_CASE("loglog slope") {
  CHECK(loglog_slope({{1.0, 3.0}, {2.0, 12.0}, {4.0, 48.0}}) == doctest::Approx(2.0));
}
