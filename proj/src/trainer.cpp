#include "ntkmmd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ntkmmd/error.hpp"
#include "ntkmmd/rng.hpp"

namespace ntkmmd {

std::string_view to_string(SampleOrder o) {
  return o == SampleOrder::given ? "given" : "shuffled";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw InputError("learning rate must be positive");
  if (epochs < 1) throw InputError("epochs must be positive");
  if (batch_size < 1) throw InputError("batch size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InputError("momentum must lie in [0, 1)");
}

double objective(const NetworkParams& params, const TwoSample& s) {
  s.validate();
  return -forward_batch(params, s.x).mean() + forward_batch(params, s.y).mean();
}

namespace {

// Signed index into the training set: >= 0 is row of X, < 0 is row -(i+1) of Y.
using Item = Eigen::Index;

std::vector<Item> epoch_order(const TwoSample& s, const TrainConfig& cfg, int epoch) {
  std::vector<Item> items(static_cast<std::size_t>(s.n_x() + s.n_y()));
  for (Eigen::Index i = 0; i < s.n_x(); ++i) items[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index j = 0; j < s.n_y(); ++j)
    items[static_cast<std::size_t>(s.n_x() + j)] = -(j + 1);
  if (cfg.order == SampleOrder::shuffled) {
    Rng rng = make_rng(derive_seed(cfg.order_seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(items.begin(), items.end(), rng);
  }
  return items;
}

void axpy_trainable(double a, const NetworkParams& x, NetworkParams& y) {
  for (std::size_t l = 0; l < y.hidden.size(); ++l) {
    y.hidden[l].weights += a * x.hidden[l].weights;
    y.hidden[l].bias += a * x.hidden[l].bias;
  }
  if (y.config.train_output_layer) y.output += a * x.output;
}

void scale_trainable(double a, NetworkParams& y) {
  for (auto& layer : y.hidden) {
    layer.weights *= a;
    layer.bias *= a;
  }
  if (y.config.train_output_layer) y.output *= a;
}

}  // namespace

TrainedPair train_online(const NetworkParams& params0, const TwoSample& train,
                         const TrainConfig& cfg, const CheckpointFn& on_checkpoint) {
  cfg.validate();
  train.validate();
  if (train.dim() != params0.config.input_dim)
    throw InputError("training data dimension does not match the network");

  TrainedPair tp{params0, params0, cfg.learning_rate * cfg.epochs, 0, 0, 0.0};
  NetworkParams& theta = tp.final;

  const double wx = -1.0 / static_cast<double>(train.n_x());
  const double wy = 1.0 / static_cast<double>(train.n_y());
  const auto total = static_cast<std::size_t>(train.n_x() + train.n_y());
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const bool buffered = batch > 1 || cfg.momentum > 0.0;

  NetworkParams grad;
  NetworkParams velocity;
  if (buffered) {
    grad = params0;
    zero_trainable(grad);
    if (cfg.momentum > 0.0) velocity = grad;
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto items = epoch_order(train, cfg, epoch);
    for (std::size_t start = 0; start < total; start += batch) {
      std::size_t end = std::min(total, start + batch);
      if (cfg.max_samples > 0)
        end = std::min(end, start + (cfg.max_samples - tp.samples_seen));
      if (end <= start) break;

      if (buffered) zero_trainable(grad);
      for (std::size_t k = start; k < end; ++k) {
        const Item item = items[k];
        const bool is_x = item >= 0;
        const auto row = is_x ? train.x.row(item) : train.y.row(-item - 1);
        const double b = is_x ? wx : wy;
        // theta <- theta - alpha * b * grad f(z; theta)
        const double norm = buffered ? accumulate_gradient(theta, row.transpose(), b, grad)
                                     : accumulate_gradient(theta, row.transpose(),
                                                           -cfg.learning_rate * b, theta);
        if (!std::isfinite(norm)) throw DivergenceError(tp.steps + 1, "non-finite gradient");
        tp.max_gradient_norm = std::max(tp.max_gradient_norm, norm);
      }
      if (buffered) {
        if (cfg.momentum > 0.0) {
          scale_trainable(cfg.momentum, velocity);
          axpy_trainable(1.0, grad, velocity);
          axpy_trainable(-cfg.learning_rate, velocity, theta);
        } else {
          axpy_trainable(-cfg.learning_rate, grad, theta);
        }
      }
      ++tp.steps;
      if (!theta.all_finite()) throw DivergenceError(tp.steps, "non-finite parameter");

      const std::size_t before = tp.samples_seen;
      tp.samples_seen += end - start;
      if (on_checkpoint && cfg.checkpoint_every > 0 &&
          tp.samples_seen / cfg.checkpoint_every > before / cfg.checkpoint_every)
        on_checkpoint(tp.samples_seen, theta);
      if (cfg.max_samples > 0 && tp.samples_seen >= cfg.max_samples) return tp;
    }
  }
  return tp;
}

Vector witness_net_batch(const NetworkParams& initial, const NetworkParams& current, double scale,
                         const SampleRef& queries) {
  if (!(scale > 0.0)) throw InputError("witness scale must be positive");
  return (forward_batch(current, queries) - forward_batch(initial, queries)) / scale;
}

Vector witness_net_batch(const TrainedPair& tp, const SampleRef& queries) {
  return witness_net_batch(tp.initial, tp.final, tp.scale, queries);
}

double witness_net(const TrainedPair& tp, const VectorRef& query) {
  if (!(tp.scale > 0.0)) throw InputError("witness scale must be positive");
  return (forward(tp.final, query) - forward(tp.initial, query)) / tp.scale;
}

double t_net(const TrainedPair& tp, const TwoSample& eval) {
  eval.validate();
  return witness_net_batch(tp, eval.x).mean() - witness_net_batch(tp, eval.y).mean();
}

}  // namespace ntkmmd
