#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "ntkmmd/calibration.hpp"
#include "ntkmmd/mmd.hpp"
#include "ntkmmd/netcore.hpp"
#include "ntkmmd/trainer.hpp"

namespace ntkmmd {

enum class ShiftKind { null, mean_shift, cov_shift };

std::string_view to_string(ShiftKind k);
ShiftKind parse_shift_kind(std::string_view name);

/// X ~ N(0, I_d). Y ~ N(delta e_1, I_d) for a mean shift, N(0, I_d + rho E)
/// with E the all-ones matrix for a covariance shift, N(0, I_d) for null.
struct ShiftSpec {
  ShiftKind kind = ShiftKind::null;
  double magnitude = 0.0;  // delta or rho
  int dim = 2;
  int n_x = 100;
  int n_y = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

TwoSample generate(const ShiftSpec& spec);

/// Two-sample Hotelling statistic with pooled covariance. Throws InputError
/// when n_x + n_y - 2 < d or the pooled covariance is singular.
double hotelling_t2(const TwoSample& s);

enum class Method { ntk_net, ntk_exact, gaussian_mmd, gaussian_mmd_linear, hotelling };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

enum class Calibration { automatic, test_only, full_gram, full_retrain, permutation };

std::string_view to_string(Calibration c);
Calibration parse_calibration(std::string_view name);

/// Network architecture without the input dimension, which comes from data.
struct NetworkShape {
  std::vector<int> hidden_widths{512};
  Activation activation = Activation::softplus;
  bool train_output_layer = false;

  NetworkConfig with_input_dim(int d) const;
};

struct RunConfig {
  Method method = Method::ntk_net;
  Calibration calibration = Calibration::automatic;
  double alpha_level = 0.05;
  int n_boot = 400;
  double train_fraction = 0.5;
  NetworkShape network;
  /// order_seed is overwritten with a value derived from the run seed.
  TrainConfig train;
  /// Samples-seen checkpoints for ntk_net learning curves (empty = none).
  std::vector<std::size_t> checkpoints;
  std::size_t threads = 1;
  bool keep_null_samples = false;

  void validate() const;
};

/// Calibration actually used when `automatic` is requested.
Calibration resolve_calibration(Method m, Calibration c);

struct CheckpointOutcome {
  std::size_t samples_seen = 0;
  double statistic = 0.0;
  double threshold = 0.0;
  bool reject = false;
};

struct TestOutcome {
  double statistic = 0.0;
  double threshold = 0.0;
  bool reject = false;
  Method method = Method::ntk_net;
  Calibration calibration = Calibration::test_only;
  std::optional<BootstrapResult> bootstrap;
  std::vector<CheckpointOutcome> trace;
};

/// Runs one two-sample test; deterministic in (data, config, seed).
/// Rejects when statistic > threshold.
TestOutcome run_test(const TwoSample& data, const RunConfig& config, std::uint64_t seed);

/// Wilson score interval at ~95% (z = 1.959964).
std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials,
                                          double z = 1.959963984540054);

struct PowerEstimate {
  std::size_t n_run = 0;
  std::size_t rejections = 0;
  double power = 0.0;
  std::pair<double, double> wilson_ci_95{0.0, 0.0};
};

PowerEstimate make_power_estimate(std::size_t rejections, std::size_t n_run);

struct PowerStudy {
  PowerEstimate overall;
  /// Per configured checkpoint, power of the test that stops training there.
  std::vector<std::pair<std::size_t, PowerEstimate>> curve;
  /// Per replica outcome, in replica order.
  std::vector<TestOutcome> replicas;
};

/// n_run independent replicas: replica r draws data with seed
/// derive_seed(derive_seed(root, r), data) and tests it with seed
/// derive_seed(root, r). Results do not depend on config.threads.
PowerStudy estimate_power(const ShiftSpec& spec, const RunConfig& config, std::size_t n_run,
                          std::uint64_t root_seed);

struct ErrorStudy {
  double t_ntk = 0.0;
  std::vector<std::pair<double, double>> pairs;  // (alpha, relative error)
  std::vector<double> t_net;                     // per alpha
  double slope = 0.0;
};

/// Trains from one theta(0) and one sample order at every alpha and compares
/// the symmetric network statistic with the exact time-zero NTK statistic.
/// The slope is the least-squares fit of log error against log alpha.
ErrorStudy ntk_error_study(const ShiftSpec& spec, const NetworkShape& shape,
                           const std::vector<double>& alphas, std::uint64_t seed,
                           const TrainConfig& base = {});

/// Least-squares slope of log(y) on log(x).
double loglog_slope(const std::vector<std::pair<double, double>>& xy);

}  // namespace ntkmmd
