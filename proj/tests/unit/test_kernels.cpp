#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "helpers.hpp"
#include "ntkmmd/error.hpp"
#include "ntkmmd/kernels.hpp"

using namespace ntkmmd;
using testing::single_unit;

TEST_CASE("gaussian kernel is 1 on the diagonal and bounded") {
  const auto k = make_gaussian(1.3);
  const Vector x{{0.2, -0.7}};
  CHECK(kernel_pair(k, x, x) == 1.0);
  const Vector y{{3.0, 1.0}};
  const double v = kernel_pair(k, x, y);
  CHECK(v > 0.0);
  CHECK(v < 1.0);
  CHECK(kernel_pair(k, y, x) == v);
}

TEST_CASE("ntk feature kernel closed form for one relu unit") {
  const auto k = make_ntk_feature(single_unit(1, Vector::Unit(2, 0), 0.1, Activation::relu));
  CHECK(kernel_pair(k, Vector{{1.0, 0.0}}, Vector{{2.0, 0.0}}) == doctest::Approx(3.0));
}

TEST_CASE("analytic NTK closed forms") {
  const auto soft = single_unit(1, Vector::Zero(2), 0, Activation::softplus);
  CHECK(ntk_analytic2(soft, Vector{{1.0, 0.0}}, Vector{{0.0, 1.0}}) == doctest::Approx(0.25));
  const auto relu = single_unit(1, Vector::Unit(2, 0), 0, Activation::relu);
  CHECK(ntk_analytic2(relu, Vector::Unit(2, 0), Vector::Unit(2, 0)) == doctest::Approx(2.0));
}

TEST_CASE("analytic NTK equals the feature-map kernel") {
  Rng rng = make_rng(31);
  for (auto act : {Activation::softplus, Activation::relu}) {
    auto p = init_params(NetworkConfig{5, {64}, act}, 32);
    p.hidden[0].bias = testing::normal_vector(64, rng);
    const auto feature = make_ntk_feature(p);
    for (int i = 0; i < 50; ++i) {
      const Vector a = testing::normal_vector(5, rng), b = testing::normal_vector(5, rng);
      CHECK(ntk_analytic2(p, a, b) == doctest::Approx(kernel_pair(feature, a, b)).epsilon(1e-10));
    }
  }
}

TEST_CASE("kernel symmetry") {
  Rng rng = make_rng(33);
  const auto p = init_params(NetworkConfig{4, {32}}, 34);
  const auto feature = make_ntk_feature(p);
  for (int i = 0; i < 20; ++i) {
    const Vector a = testing::normal_vector(4, rng), b = testing::normal_vector(4, rng);
    CHECK(ntk_analytic2(p, a, b) == ntk_analytic2(p, b, a));
    CHECK(kernel_pair(feature, a, b) == doctest::Approx(kernel_pair(feature, b, a)).epsilon(1e-12));
  }
}

TEST_CASE("gram blocks") {
  const SampleMatrix a = testing::normal_samples(12, 3, 35);
  SUBCASE("gaussian square block is symmetric with unit diagonal") {
    const auto g = gram(make_gaussian(1.0), a, a);
    CHECK(g.values.isApprox(g.values.transpose(), 0.0));
    CHECK(g.values.diagonal().isOnes(0.0));
  }
  SUBCASE("ntk blocks are positive semidefinite") {
    for (const auto& k : {make_ntk_feature(init_params(NetworkConfig{3, {8, 6}}, 36)),
                          make_ntk(init_params(NetworkConfig{3, {40}}, 37))}) {
      const auto g = gram(k, a, a);
      const Eigen::SelfAdjointEigenSolver<Matrix> es(g.values);
      CHECK(es.eigenvalues().minCoeff() >= -1e-8 * g.values.diagonal().maxCoeff());
    }
  }
  SUBCASE("rectangular block holds kernel_pair values") {
    const auto k = make_ntk(init_params(NetworkConfig{3, {10}}, 38));
    const auto g = gram(k, a.topRows(1), a.middleRows(1, 2));
    REQUIRE(g.rows() == 1);
    REQUIRE(g.cols() == 2);
    for (int j = 0; j < 2; ++j)
      CHECK(g(0, j) == doctest::Approx(kernel_pair(k, a.row(0).transpose(), a.row(1 + j).transpose())));
  }
}

TEST_CASE("normalize_by_max_diagonal") {
  GramBlock g{Matrix{{4.0, 1.0}, {1.0, 2.0}}};
  CHECK(normalize_by_max_diagonal(g) == 4.0);
  CHECK(g(0, 0) == 1.0);
  CHECK(g(0, 1) == 0.25);
}

TEST_CASE("median bandwidth") {
  CHECK(median_bandwidth(SampleMatrix{{0.0}, {1.0}, {3.0}}) == 2.0);
  CHECK(median_bandwidth(SampleMatrix{{0.0}, {1.0}}) == 1.0);
  const double m = median_bandwidth(testing::normal_samples(1000, 100, 39));
  CHECK(std::abs(m / std::sqrt(200.0) - 1.0) < 0.05);
  CHECK(median_bandwidth(SampleMatrix::Ones(3, 2)) == 0.0);
  CHECK(median_bandwidth_or_unit(SampleMatrix::Ones(3, 2)) == 1.0);
}

TEST_CASE("kernel factories validate") {
  CHECK_THROWS_AS(make_gaussian(0.0), InputError);
  CHECK_THROWS_AS(make_ntk_analytic2(init_params(NetworkConfig{2, {4, 4}}, 1)), InputError);
  CHECK(std::holds_alternative<NtkFeatureKernel>(make_ntk(init_params(NetworkConfig{2, {4, 4}}, 1))));
  CHECK(std::holds_alternative<NtkAnalytic2Kernel>(make_ntk(init_params(NetworkConfig{2, {4}}, 1))));
  const auto k = make_ntk(init_params(NetworkConfig{2, {4}}, 1));
  CHECK_THROWS(gram(k, SampleMatrix::Zero(2, 3), SampleMatrix::Zero(2, 3)));
}
