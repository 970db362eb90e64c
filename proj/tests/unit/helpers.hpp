#pragma once

#include <random>

#include "ntkmmd/netcore.hpp"
#include "ntkmmd/rng.hpp"
#include "ntkmmd/types.hpp"

namespace testing {

inline ntkmmd::SampleMatrix normal_samples(int n, int d, std::uint64_t seed, double shift = 0.0) {
  ntkmmd::Rng rng = ntkmmd::make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ntkmmd::SampleMatrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng) + shift;
  return m;
}

inline ntkmmd::Vector normal_vector(int d, ntkmmd::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return ntkmmd::Vector::NullaryExpr(d, [&] { return normal(rng); });
}

// Single hidden unit with output weight a, input weights w and bias b.
inline ntkmmd::NetworkParams single_unit(double a, const ntkmmd::Vector& w, double b,
                                         ntkmmd::Activation act) {
  ntkmmd::NetworkConfig cfg{static_cast<int>(w.size()), {1}, act, false};
  ntkmmd::NetworkParams p = ntkmmd::init_params(cfg, 0);
  p.hidden[0].weights.row(0) = w.transpose();
  p.hidden[0].bias[0] = b;
  p.output[0] = a;
  return p;
}

}  // namespace testing
