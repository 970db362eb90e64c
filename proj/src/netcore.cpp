#include "ntkmmd/netcore.hpp"

#include <cmath>
#include <random>

#include "ntkmmd/error.hpp"
#include "ntkmmd/rng.hpp"

namespace ntkmmd {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::softplus:
      return "softplus";
    case Activation::relu:
      return "relu";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "softplus") return Activation::softplus;
  if (name == "relu") return Activation::relu;
  throw InputError("unknown activation '" + std::string(name) + "'");
}

double activate(Activation a, double z) noexcept {
  if (a == Activation::relu) return z > 0.0 ? z : 0.0;
  if (z > 30.0) return z;
  return std::log1p(std::exp(z));
}

double activate_derivative(Activation a, double z) noexcept {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  return 1.0 / (1.0 + std::exp(-z));
}

void NetworkConfig::validate() const {
  if (input_dim < 1) throw InputError("input_dim must be positive");
  if (hidden_widths.empty() || hidden_widths.size() > 2)
    throw InputError("network depth must be 2 or 3 (one or two hidden layers)");
  for (int w : hidden_widths)
    if (w < 1) throw InputError("hidden widths must be positive");
}

std::size_t NetworkParams::trainable_size() const {
  std::size_t n = 0;
  for (const auto& layer : hidden)
    n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  if (config.train_output_layer) n += static_cast<std::size_t>(output.size());
  return n;
}

Vector NetworkParams::flatten_trainable() const {
  Vector flat(static_cast<Eigen::Index>(trainable_size()));
  Eigen::Index pos = 0;
  for (const auto& layer : hidden) {
    const auto nw = layer.weights.size();
    flat.segment(pos, nw) = Eigen::Map<const Vector>(layer.weights.data(), nw);
    pos += nw;
    flat.segment(pos, layer.bias.size()) = layer.bias;
    pos += layer.bias.size();
  }
  if (config.train_output_layer) flat.segment(pos, output.size()) = output;
  return flat;
}

void NetworkParams::assign_trainable(const VectorRef& flat) {
  if (static_cast<std::size_t>(flat.size()) != trainable_size())
    throw InputError("flat parameter vector has wrong length");
  Eigen::Index pos = 0;
  for (auto& layer : hidden) {
    const auto nw = layer.weights.size();
    Eigen::Map<Vector>(layer.weights.data(), nw) = flat.segment(pos, nw);
    pos += nw;
    layer.bias = flat.segment(pos, layer.bias.size());
    pos += layer.bias.size();
  }
  if (config.train_output_layer) output = flat.segment(pos, output.size());
}

bool NetworkParams::all_finite() const {
  for (const auto& layer : hidden)
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  return output.allFinite();
}

NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  NetworkParams p;
  p.config = config;
  int fan_in = config.input_dim;
  for (std::size_t l = 0; l < config.hidden_widths.size(); ++l) {
    const int width = config.hidden_widths[l];
    const double scale = l == 0 ? 1.0 : 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer{Matrix(width, fan_in), Vector::Zero(width)};
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
      layer.weights.data()[i] = scale * normal(rng);
    p.hidden.push_back(std::move(layer));
    fan_in = width;
  }
  const double out_sd = 1.0 / std::sqrt(static_cast<double>(config.last_width()));
  p.output.resize(config.last_width());
  for (Eigen::Index i = 0; i < p.output.size(); ++i) p.output[i] = out_sd * normal(rng);
  return p;
}

namespace {

void check_dim(const NetworkParams& params, Eigen::Index d) {
  if (d != params.config.input_dim)
    throw InputError("input has dimension " + std::to_string(d) + ", network expects " +
                     std::to_string(params.config.input_dim));
}

// Pre-activations and activations of every hidden layer for one input.
struct Trace {
  std::vector<Vector> pre;
  std::vector<Vector> post;
};

Trace run(const NetworkParams& params, const VectorRef& x) {
  const Activation act = params.config.activation;
  Trace t;
  t.pre.reserve(params.hidden.size());
  t.post.reserve(params.hidden.size());
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    const auto& layer = params.hidden[l];
    Vector z = layer.bias;
    if (l == 0)
      z.noalias() += layer.weights * x;
    else
      z.noalias() += layer.weights * t.post.back();
    Vector h = z.unaryExpr([act](double v) { return activate(act, v); });
    t.pre.push_back(std::move(z));
    t.post.push_back(std::move(h));
  }
  return t;
}

// Backpropagated error signals d f / d z_l for every hidden layer.
std::vector<Vector> deltas(const NetworkParams& params, const Trace& t) {
  const Activation act = params.config.activation;
  const std::size_t L = params.hidden.size();
  std::vector<Vector> out(L);
  auto dsigma = [act](double v) { return activate_derivative(act, v); };
  out[L - 1] = params.output.cwiseProduct(t.pre[L - 1].unaryExpr(dsigma));
  for (std::size_t l = L - 1; l-- > 0;) {
    Vector back = params.hidden[l + 1].weights.transpose() * out[l + 1];
    out[l] = back.cwiseProduct(t.pre[l].unaryExpr(dsigma));
  }
  return out;
}

}  // namespace

double forward(const NetworkParams& params, const VectorRef& x) {
  check_dim(params, x.size());
  const Trace t = run(params, x);
  return params.output.dot(t.post.back());
}

Vector forward_batch(const NetworkParams& params, const SampleRef& samples) {
  check_dim(params, samples.cols());
  const Activation act = params.config.activation;
  Matrix h = samples;
  for (const auto& layer : params.hidden) {
    Matrix z = h * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    h = z.unaryExpr([act](double v) { return activate(act, v); });
  }
  return h * params.output;
}

Vector param_gradient(const NetworkParams& params, const VectorRef& x) {
  check_dim(params, x.size());
  const Trace t = run(params, x);
  const auto d = deltas(params, t);
  Vector flat(static_cast<Eigen::Index>(params.trainable_size()));
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    const Eigen::Index width = d[l].size();
    const Eigen::Index fan_in = params.hidden[l].weights.cols();
    for (Eigen::Index k = 0; k < width; ++k) {
      if (l == 0)
        flat.segment(pos, fan_in) = d[l][k] * x;
      else
        flat.segment(pos, fan_in) = d[l][k] * t.post[l - 1];
      pos += fan_in;
    }
    flat.segment(pos, width) = d[l];
    pos += width;
  }
  if (params.config.train_output_layer) flat.segment(pos, t.post.back().size()) = t.post.back();
  return flat;
}

double accumulate_gradient(const NetworkParams& at, const VectorRef& x, double scale,
                           NetworkParams& into) {
  check_dim(at, x.size());
  const Trace t = run(at, x);
  const auto d = deltas(at, t);
  // All signals are computed before any write, so `at` may alias `into`.
  double sq = 0.0;
  for (std::size_t l = 0; l < at.hidden.size(); ++l) {
    auto& layer = into.hidden[l];
    const double dn = d[l].squaredNorm();
    if (l == 0) {
      layer.weights.noalias() += (scale * d[l]) * x.transpose();
      sq += dn * (x.squaredNorm() + 1.0);
    } else {
      layer.weights.noalias() += (scale * d[l]) * t.post[l - 1].transpose();
      sq += dn * (t.post[l - 1].squaredNorm() + 1.0);
    }
    layer.bias.noalias() += scale * d[l];
  }
  if (at.config.train_output_layer) {
    into.output.noalias() += scale * t.post.back();
    sq += t.post.back().squaredNorm();
  }
  return std::sqrt(sq);
}

void zero_trainable(NetworkParams& params) {
  for (auto& layer : params.hidden) {
    layer.weights.setZero();
    layer.bias.setZero();
  }
  if (params.config.train_output_layer) params.output.setZero();
}

double trainable_distance(const NetworkParams& a, const NetworkParams& b) {
  double sq = 0.0;
  for (std::size_t l = 0; l < a.hidden.size(); ++l) {
    sq += (a.hidden[l].weights - b.hidden[l].weights).squaredNorm();
    sq += (a.hidden[l].bias - b.hidden[l].bias).squaredNorm();
  }
  if (a.config.train_output_layer) sq += (a.output - b.output).squaredNorm();
  return std::sqrt(sq);
}

double trainable_norm(const NetworkParams& p) {
  double sq = 0.0;
  for (const auto& layer : p.hidden) sq += layer.weights.squaredNorm() + layer.bias.squaredNorm();
  if (p.config.train_output_layer) sq += p.output.squaredNorm();
  return std::sqrt(sq);
}

}  // namespace ntkmmd
