#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>

#include "ntkmmd/mmd.hpp"
#include "ntkmmd/netcore.hpp"

namespace ntkmmd {

enum class SampleOrder {
  given,     // all X rows in order, then all Y rows
  shuffled,  // X and Y rows interleaved uniformly at random, reshuffled per epoch
};

std::string_view to_string(SampleOrder o);

struct TrainConfig {
  /// Theoretical rate alpha. Because the objective averages over each class,
  /// the per-sample step on a class-X sample is alpha / n_x.
  double learning_rate = 0.1;
  int epochs = 1;
  /// Samples per update; any value >= n_x + n_y gives full-batch descent.
  int batch_size = 1;
  SampleOrder order = SampleOrder::shuffled;
  std::uint64_t order_seed = 0;
  double momentum = 0.0;
  /// Stop after this many samples (0 = no limit). Used for prefix training.
  std::size_t max_samples = 0;
  /// Invoke the checkpoint callback every this many samples (0 = never).
  std::size_t checkpoint_every = 0;

  void validate() const;
};

/// theta(0) and theta(t) of one training run. `scale` is the training time t:
/// learning_rate * epochs.
struct TrainedPair {
  NetworkParams initial;
  NetworkParams final;
  double scale = 0.0;
  std::size_t samples_seen = 0;
  std::size_t steps = 0;
  /// Largest gradient norm ||grad f(z)|| met during training.
  double max_gradient_norm = 0.0;
};

using CheckpointFn = std::function<void(std::size_t samples_seen, const NetworkParams& current)>;

/// -(1/n_x) sum f(x_i) + (1/n_y) sum f(y_j).
double objective(const NetworkParams& params, const TwoSample& s);

/// SGD on the objective above: one update per batch, each sample z_i
/// contributing b_i grad f(z_i) with b_i = -1/n_x (class X) or +1/n_y
/// (class Y). Throws DivergenceError at the first step that leaves a
/// non-finite parameter.
TrainedPair train_online(const NetworkParams& params0, const TwoSample& train,
                         const TrainConfig& cfg, const CheckpointFn& on_checkpoint = {});

/// (f(q; final) - f(q; initial)) / scale.
double witness_net(const TrainedPair& tp, const VectorRef& query);
Vector witness_net_batch(const TrainedPair& tp, const SampleRef& queries);

/// Same witness for an intermediate checkpoint of the run that produced tp.
Vector witness_net_batch(const NetworkParams& initial, const NetworkParams& current, double scale,
                         const SampleRef& queries);

/// Mean witness over eval.x minus mean witness over eval.y. With eval equal
/// to the training set this is the objective decrease divided by scale.
double t_net(const TrainedPair& tp, const TwoSample& eval);

}  // namespace ntkmmd
