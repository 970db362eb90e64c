#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ntkmmd/bench.hpp"
#include "ntkmmd/calibration.hpp"
#include "ntkmmd/types.hpp"

namespace ntkmmd {

/// Sliding-window scan against a fixed pilot block. Window positions are
/// labelled by their exclusive end index t; the window covers rows
/// [t - window, t). The first position is t = pilot_end + window and
/// positions advance by `stride` while t <= T.
struct ScanConfig {
  int window = 100;
  int stride = 10;
  int pilot_start = 0;
  int pilot_end = 200;
  /// One of ntk_net, ntk_exact, gaussian_mmd, hotelling.
  Method statistic = Method::ntk_net;
  NetworkShape network;
  TrainConfig train;
  std::uint64_t seed = 0;
  /// Scale every attribute by the pilot block's mean and deviation.
  bool standardize = true;
  std::size_t threads = 1;

  int reference_size() const noexcept { return pilot_end - pilot_start; }
  void validate() const;
};

struct ChangePointTrace {
  std::vector<long long> times;
  std::vector<double> values;
  std::optional<double> threshold;
  std::optional<long long> first_alarm;

  /// Sets the threshold and recomputes first_alarm (first value > threshold).
  void apply_threshold(double t);
  /// Fraction of positions whose value exceeds the threshold.
  double alarm_rate() const;
};

/// Per-attribute affine map x -> (x - mean) / sd, with sd 0 mapped to 1.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const SampleRef& block);
  SampleMatrix apply(const SampleRef& rows) const;
};

/// Two-sample statistic between a reference block (X) and a window (Y):
/// the symmetric biased MMD for gaussian_mmd and ntk_exact, the symmetric
/// network statistic for ntk_net (trained from theta0), Hotelling otherwise.
double window_statistic(const SampleRef& reference, const SampleRef& window,
                        const ScanConfig& cfg, const NetworkParams& theta0,
                        std::uint64_t order_seed);

/// theta(0) shared by every position and calibration draw of `cfg`.
NetworkParams scan_initial_params(const ScanConfig& cfg, int dim);

ChangePointTrace scan(const SampleRef& series, const ScanConfig& cfg,
                      std::optional<double> threshold = std::nullopt);

/// Null distribution of window_statistic from disjoint random sub-blocks of
/// a pre-change pool: reference_size() rows as the reference and `window`
/// rows as the window, per draw. The pool is standardized by its own
/// statistics when cfg.standardize is set. The threshold is the
/// (1 - alpha_level) empirical quantile.
BootstrapResult calibrate_pilot(const SampleRef& pool, const ScanConfig& cfg, int n_boot,
                                double alpha_level);

/// Synthetic series: rows before `change_at` ~ N(0, I_d), rows from
/// `change_at` on ~ N(0, I_d + rho E). change_at >= length gives a pure
/// null series.
SampleMatrix generate_change_series(int length, int dim, int change_at, double rho,
                                    std::uint64_t seed);

}  // namespace ntkmmd
