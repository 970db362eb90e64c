#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ntkmmd/types.hpp"

namespace ntkmmd {

enum class Activation { softplus, relu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// sigma(z). Softplus is evaluated without overflow; above z = 30 it returns z.
double activate(Activation a, double z) noexcept;
/// sigma'(z). The relu derivative at exactly 0 is 0.
double activate_derivative(Activation a, double z) noexcept;

/// Fully-connected scalar-output network: one or two hidden layers followed
/// by a linear output layer.
struct NetworkConfig {
  int input_dim = 1;
  std::vector<int> hidden_widths{512};
  Activation activation = Activation::softplus;
  bool train_output_layer = false;

  /// Number of fully-connected layers, counting the output layer.
  int depth() const noexcept { return static_cast<int>(hidden_widths.size()) + 1; }
  int last_width() const { return hidden_widths.back(); }

  /// Throws InputError unless depth is 2 or 3 and all widths are positive.
  void validate() const;

  bool operator==(const NetworkConfig&) const = default;
};

struct DenseLayer {
  Matrix weights;  // width x fan_in
  Vector bias;     // width
};

struct NetworkParams {
  NetworkConfig config;
  std::vector<DenseLayer> hidden;
  Vector output;  // weights of the linear output layer

  /// Number of entries in the flat trainable-parameter vector.
  std::size_t trainable_size() const;

  /// Trainable parameters in the canonical flattening: layer by layer,
  /// row-major weights then biases, then output weights if trainable.
  Vector flatten_trainable() const;
  void assign_trainable(const VectorRef& flat);

  bool all_finite() const;
};

/// Output weights ~ N(0, 1/m_last); first-layer weights ~ N(0, 1); deeper
/// hidden weights ~ N(0, 1/fan_in); biases 0. Draw order is layer by layer,
/// row-major, then the output layer, from one mt19937_64 stream.
NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed);

/// f(x; theta).
double forward(const NetworkParams& params, const VectorRef& x);

/// f evaluated on every row of `samples`.
Vector forward_batch(const NetworkParams& params, const SampleRef& samples);

/// Flat gradient of f(x; theta) over the trainable parameters.
Vector param_gradient(const NetworkParams& params, const VectorRef& x);

/// Adds scale * grad_theta f(x; at) into the trainable entries of `into`.
/// `at` and `into` may alias. Returns the norm of the unscaled gradient.
double accumulate_gradient(const NetworkParams& at, const VectorRef& x, double scale,
                           NetworkParams& into);

/// Sets every trainable entry of `params` to zero (used for gradient buffers).
void zero_trainable(NetworkParams& params);

/// ||theta_a - theta_b|| over trainable entries.
double trainable_distance(const NetworkParams& a, const NetworkParams& b);
double trainable_norm(const NetworkParams& p);

}  // namespace ntkmmd
