#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ntkmmd/kernels.hpp"
#include "ntkmmd/mmd.hpp"
#include "ntkmmd/trainer.hpp"

namespace ntkmmd {

enum class Label : std::uint8_t { x, y };
enum class Role : std::uint8_t { train, test };

enum class BootstrapMode { test_only, full_gram, full_retrain, pilot, permutation };

std::string_view to_string(BootstrapMode m);

struct BootstrapResult {
  std::vector<double> null_samples;
  double threshold = 0.0;
  double alpha_level = 0.05;
  BootstrapMode mode = BootstrapMode::test_only;
  /// Training samples processed across all draws (retraining modes only).
  std::size_t training_samples = 0;
};

/// k-th order statistic with k = ceil(level * (n + 1)) clamped to [1, n].
double empirical_quantile(std::span<const double> values, double level);

/// Uniform permutation of [0, n) for bootstrap draw `draw`. Seed-indexed, so
/// draws are identical whatever order or thread computes them.
std::vector<std::size_t> draw_permutation(std::uint64_t seed, std::size_t draw, std::size_t n);

/// Mean of values labelled x minus mean of values labelled y.
double labelled_mean_difference(const VectorRef& values, std::span<const Label> labels);

/// Null distribution from permuting the test labels with the witness fixed.
/// Only the supplied witness values are used; nothing is re-evaluated.
BootstrapResult bootstrap_test_only(const VectorRef& witness_values, std::span<const Label> labels,
                                    int n_boot, double alpha_level, std::uint64_t seed,
                                    std::size_t threads = 0);

/// Class and (optionally) split membership of every index of a pooled Gram
/// block. Empty `roles` selects the symmetric biased statistic; otherwise the
/// asymmetric statistic with test rows against train columns.
struct PooledLayout {
  std::vector<Label> labels;
  std::vector<Role> roles;

  bool asymmetric() const noexcept { return !roles.empty(); }
  void validate(std::size_t n) const;
};

/// Layout of [X; Y] for the symmetric statistic.
PooledLayout symmetric_layout(Eigen::Index n_x, Eigen::Index n_y);
/// Layout of [X_train; Y_train; X_test; Y_test] for the asymmetric statistic.
PooledLayout split_layout(const SplitTwoSample& s);
/// Pooled rows in the order used by split_layout.
SampleMatrix pooled_rows(const SplitTwoSample& s);

enum class PermutationScope { all, test_only };

struct FullGramOptions {
  PermutationScope scope = PermutationScope::all;
  /// Use the identity permutation for draw 0 (reproduces the observed value).
  bool include_identity = false;
};

/// Statistic of `layout` evaluated on the pooled Gram block.
double pooled_statistic(const GramBlock& pooled, const PooledLayout& layout);

/// Exact witness at every test index (in pooled order), built from the train
/// columns of the pooled Gram block.
Vector pooled_witness(const GramBlock& pooled, const PooledLayout& layout);

/// Null distribution by relabelling pooled indices and recomputing the
/// statistic from the fixed Gram values.
BootstrapResult bootstrap_full_gram(const GramBlock& pooled, const PooledLayout& layout,
                                    int n_boot, double alpha_level, std::uint64_t seed,
                                    const FullGramOptions& options = {}, std::size_t threads = 0);

struct RetrainOptions {
  bool include_identity = false;
};

/// Null distribution by permuting all labels, retraining from the same
/// theta(0), and recomputing the split network statistic.
BootstrapResult bootstrap_full_retrain(const SplitTwoSample& split, const NetworkParams& theta0,
                                       const TrainConfig& train, int n_boot, double alpha_level,
                                       std::uint64_t seed, const RetrainOptions& options = {},
                                       std::size_t threads = 0);

/// Convenience form: splits `data` and initializes theta(0) from root_seed
/// exactly as the ntk_net test pipeline does.
BootstrapResult bootstrap_full_retrain(const TwoSample& data, double train_fraction,
                                       const NetworkConfig& net, TrainConfig train, int n_boot,
                                       double alpha_level, std::uint64_t root_seed,
                                       const RetrainOptions& options = {}, std::size_t threads = 0);

/// Plug-in estimates of E K(x, y)^2 within and across the two samples.
struct NuEstimate {
  double pp = 0.0;
  double pq = 0.0;
  double qq = 0.0;
  double max = 0.0;
};

NuEstimate estimate_nu(const KernelSpec& spec, const TwoSample& s);

enum class ThresholdVariant { thm1, thm2, thm3 };

std::string_view to_string(ThresholdVariant v);
ThresholdVariant parse_threshold_variant(std::string_view name);

/// Inputs of the closed-form concentration thresholds.
struct ThresholdParams {
  long long n = 0;        // n_x + n_y
  double c = 0.5;         // balance constant, in (0, 1)
  double nu = 1.0;        // bound on the squared kernel integrals, in (0, 1]
  double alpha_level = 0.05;
  ThresholdVariant variant = ThresholdVariant::thm1;
  double gamma = 0.05;    // good-event probability slack, thm2 only

  void validate() const;
};

/// thm1: 4/(c n) + 4 l1 sqrt(nu/(c n)),             l1 = sqrt(8 log(4/alpha))
/// thm2: 4 (sqrt(1.1) l21 + l1g) sqrt(nu/(c n)),    l21 = sqrt(4 log(4/alpha)),
///                                                   l1g = sqrt(4 log(8/gamma))
/// thm3: 4 l1 sqrt(nu/(c n))
double theoretical_threshold(const ThresholdParams& tp);

}  // namespace ntkmmd
