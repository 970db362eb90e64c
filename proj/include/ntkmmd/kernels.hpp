#pragma once

#include <memory>
#include <variant>

#include "ntkmmd/netcore.hpp"
#include "ntkmmd/types.hpp"

namespace ntkmmd {

/// Empirical NTK: inner product of parameter gradients at the held params.
/// Evaluated at initial params this is the time-zero kernel.
struct NtkFeatureKernel {
  std::shared_ptr<const NetworkParams> params;
};

/// Closed-form time-zero NTK of a two-layer network with a fixed output
/// layer: (sum_k a_k^2 s'(w_k.x + b_k) s'(w_k.x' + b_k)) (1 + x.x').
struct NtkAnalytic2Kernel {
  std::shared_ptr<const NetworkParams> params;
};

/// exp(-||x - x'||^2 / (2 h^2)).
struct GaussianKernel {
  double bandwidth = 1.0;
};

using KernelSpec = std::variant<NtkFeatureKernel, NtkAnalytic2Kernel, GaussianKernel>;

KernelSpec make_ntk_feature(NetworkParams params);
/// Throws InputError unless the network has depth 2 and a fixed output layer.
KernelSpec make_ntk_analytic2(NetworkParams params);
/// Throws InputError unless bandwidth > 0 and finite.
KernelSpec make_gaussian(double bandwidth);

/// The time-zero NTK for `params`: analytic when the architecture allows it,
/// otherwise the feature-map kernel.
KernelSpec make_ntk(NetworkParams params);

/// Input dimension required by the kernel, or -1 for dimension-free kernels.
int kernel_input_dim(const KernelSpec& spec);

double kernel_pair(const KernelSpec& spec, const VectorRef& x, const VectorRef& xp);

double ntk_analytic2(const NetworkParams& params, const VectorRef& x, const VectorRef& xp);

/// Dense block of kernel evaluations, values(i, j) = K(A_i, B_j).
struct GramBlock {
  Matrix values;

  Eigen::Index rows() const noexcept { return values.rows(); }
  Eigen::Index cols() const noexcept { return values.cols(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values(i, j); }
};

GramBlock gram(const KernelSpec& spec, const SampleRef& a, const SampleRef& b);

/// Divides every entry by the largest diagonal entry of `square` (a Gram
/// block of a list with itself), so that sup K(x, x) <= 1 on the sample.
/// Returns the divisor.
double normalize_by_max_diagonal(GramBlock& square);

/// Median of the pairwise Euclidean distances over unordered distinct pairs.
/// Even pair counts average the two central order statistics. Returns 0 when
/// every pair coincides.
double median_bandwidth(const SampleRef& z);

/// Median bandwidth with a fallback of 1 when all samples coincide, so the
/// Gaussian kernel stays well defined (every kernel value is then 1).
double median_bandwidth_or_unit(const SampleRef& z);

}  // namespace ntkmmd
