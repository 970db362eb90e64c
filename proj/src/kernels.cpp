#include "ntkmmd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ntkmmd/error.hpp"

namespace ntkmmd {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require_analytic2(const NetworkParams& p) {
  if (p.config.depth() != 2)
    throw InputError("analytic NTK requires a two-layer network");
  if (p.config.train_output_layer)
    throw InputError("analytic NTK requires a fixed output layer");
}

// a_k^2 * s'(w_k.x + b_k) for every row of `samples`, one row per sample.
Matrix scaled_slopes(const NetworkParams& p, const SampleRef& samples, bool with_output) {
  const Activation act = p.config.activation;
  const auto& layer = p.hidden.front();
  Matrix z = samples * layer.weights.transpose();
  z.rowwise() += layer.bias.transpose();
  Matrix s = z.unaryExpr([act](double v) { return activate_derivative(act, v); });
  if (with_output) s.array().rowwise() *= p.output.array().square().transpose();
  return s;
}

Matrix feature_matrix(const NetworkParams& p, const SampleRef& samples) {
  Matrix phi(samples.rows(), static_cast<Eigen::Index>(p.trainable_size()));
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    phi.row(i) = param_gradient(p, samples.row(i).transpose()).transpose();
  return phi;
}

void check_pair(const KernelSpec& spec, Eigen::Index dx, Eigen::Index dy) {
  if (dx != dy) throw InputError("kernel arguments have different dimensions");
  const int d = kernel_input_dim(spec);
  if (d >= 0 && dx != d)
    throw InputError("kernel argument has dimension " + std::to_string(dx) + ", expected " +
                     std::to_string(d));
}

}  // namespace

KernelSpec make_ntk_feature(NetworkParams params) {
  params.config.validate();
  return NtkFeatureKernel{std::make_shared<const NetworkParams>(std::move(params))};
}

KernelSpec make_ntk_analytic2(NetworkParams params) {
  params.config.validate();
  require_analytic2(params);
  return NtkAnalytic2Kernel{std::make_shared<const NetworkParams>(std::move(params))};
}

KernelSpec make_gaussian(double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw InputError("gaussian bandwidth must be positive and finite");
  return GaussianKernel{bandwidth};
}

KernelSpec make_ntk(NetworkParams params) {
  if (params.config.depth() == 2 && !params.config.train_output_layer)
    return make_ntk_analytic2(std::move(params));
  return make_ntk_feature(std::move(params));
}

int kernel_input_dim(const KernelSpec& spec) {
  return std::visit(overloaded{[](const GaussianKernel&) { return -1; },
                               [](const auto& k) { return k.params->config.input_dim; }},
                    spec);
}

double ntk_analytic2(const NetworkParams& p, const VectorRef& x, const VectorRef& xp) {
  require_analytic2(p);
  if (x.size() != p.config.input_dim || xp.size() != p.config.input_dim)
    throw InputError("analytic NTK argument dimension mismatch");
  const Activation act = p.config.activation;
  const auto& layer = p.hidden.front();
  Vector zx = layer.weights * x + layer.bias;
  Vector zy = layer.weights * xp + layer.bias;
  auto ds = [act](double v) { return activate_derivative(act, v); };
  // The slope product is formed first so that the result is exactly symmetric.
  const double weight =
      (p.output.array().square() * (zx.unaryExpr(ds).array() * zy.unaryExpr(ds).array())).sum();
  return weight * (1.0 + x.dot(xp));
}

double kernel_pair(const KernelSpec& spec, const VectorRef& x, const VectorRef& xp) {
  check_pair(spec, x.size(), xp.size());
  return std::visit(
      overloaded{
          [&](const GaussianKernel& g) {
            return std::exp(-(x - xp).squaredNorm() / (2.0 * g.bandwidth * g.bandwidth));
          },
          [&](const NtkAnalytic2Kernel& k) { return ntk_analytic2(*k.params, x, xp); },
          [&](const NtkFeatureKernel& k) {
            return param_gradient(*k.params, x).dot(param_gradient(*k.params, xp));
          }},
      spec);
}

GramBlock gram(const KernelSpec& spec, const SampleRef& a, const SampleRef& b) {
  if (a.rows() == 0 || b.rows() == 0) throw InputError("gram requires nonempty sample lists");
  check_pair(spec, a.cols(), b.cols());
  const bool same = a.data() == b.data() && a.rows() == b.rows();
  GramBlock out;
  std::visit(
      overloaded{
          [&](const GaussianKernel& g) {
            const double inv = 1.0 / (2.0 * g.bandwidth * g.bandwidth);
            out.values.resize(a.rows(), b.rows());
            for (Eigen::Index i = 0; i < a.rows(); ++i)
              for (Eigen::Index j = 0; j < b.rows(); ++j)
                out.values(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
          },
          [&](const NtkAnalytic2Kernel& k) {
            const Matrix sa = scaled_slopes(*k.params, a, true);
            const Matrix sb = same ? Matrix{} : scaled_slopes(*k.params, b, false);
            Matrix inner = a * b.transpose();
            inner.array() += 1.0;
            if (same) {
              const Matrix raw = scaled_slopes(*k.params, a, false);
              out.values = (sa * raw.transpose()).cwiseProduct(inner);
            } else {
              out.values = (sa * sb.transpose()).cwiseProduct(inner);
            }
          },
          [&](const NtkFeatureKernel& k) {
            const Matrix fa = feature_matrix(*k.params, a);
            if (same) {
              out.values = fa * fa.transpose();
            } else {
              out.values = fa * feature_matrix(*k.params, b).transpose();
            }
          }},
      spec);
  if (!out.values.allFinite()) throw NumericalError("gram block contains non-finite values");
  return out;
}

double normalize_by_max_diagonal(GramBlock& square) {
  if (square.rows() != square.cols() || square.rows() == 0)
    throw InputError("normalization needs a nonempty square gram block");
  const double top = square.values.diagonal().maxCoeff();
  if (!(top > 0.0)) throw NumericalError("gram diagonal is not positive");
  square.values /= top;
  return top;
}

double median_bandwidth(const SampleRef& z) {
  const Eigen::Index n = z.rows();
  if (n < 2) throw InputError("median bandwidth needs at least 2 samples");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back((z.row(i) - z.row(j)).norm());
  const std::size_t count = dist.size();
  const std::size_t hi = count / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(hi), dist.end());
  const double upper = dist[hi];
  if (count % 2 == 1) return upper;
  const double lower =
      *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(hi));
  return 0.5 * (lower + upper);
}

double median_bandwidth_or_unit(const SampleRef& z) {
  const double h = median_bandwidth(z);
  return h > 0.0 ? h : 1.0;
}

}  // namespace ntkmmd
