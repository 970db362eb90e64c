#include "ntkmmd/changepoint.hpp"

#include <cmath>
#include <random>

#include "ntkmmd/error.hpp"
#include "ntkmmd/kernels.hpp"
#include "ntkmmd/parallel.hpp"
#include "ntkmmd/rng.hpp"

namespace ntkmmd {

namespace {
// Stream for the order seeds of calibration draws, kept apart from positions.
constexpr std::uint64_t kCalibrationOrderStream = 0x70696c6f74ULL;
}  // namespace

void ScanConfig::validate() const {
  if (window < 2) throw InputError("window must hold at least 2 samples");
  if (stride < 1) throw InputError("stride must be positive");
  if (pilot_start < 0 || pilot_end <= pilot_start) throw InputError("pilot block is empty");
  if (reference_size() < window) throw InputError("pilot block must be at least one window long");
  if (statistic == Method::gaussian_mmd_linear)
    throw InputError("linear-time MMD is not a scan statistic");
  train.validate();
}

void ChangePointTrace::apply_threshold(double t) {
  threshold = t;
  first_alarm.reset();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] > t) {
      first_alarm = times[i];
      break;
    }
}

double ChangePointTrace::alarm_rate() const {
  if (!threshold) throw InputError("alarm rate needs a threshold");
  if (values.empty()) return 0.0;
  std::size_t hits = 0;
  for (double v : values) hits += v > *threshold ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(values.size());
}

Standardizer Standardizer::fit(const SampleRef& block) {
  if (block.rows() < 1) throw InputError("cannot standardize by an empty block");
  Standardizer s;
  s.mean = block.colwise().mean().transpose();
  const Matrix centered = block.rowwise() - s.mean.transpose();
  const double denom = std::max<double>(1.0, static_cast<double>(block.rows() - 1));
  s.scale = (centered.array().square().colwise().sum() / denom).sqrt().transpose();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j)
    if (!(s.scale[j] > 0.0)) s.scale[j] = 1.0;
  return s;
}

SampleMatrix Standardizer::apply(const SampleRef& rows) const {
  SampleMatrix out = rows.rowwise() - mean.transpose();
  out.array().rowwise() /= scale.transpose().array();
  return out;
}

NetworkParams scan_initial_params(const ScanConfig& cfg, int dim) {
  return init_params(cfg.network.with_input_dim(dim), derive_seed(cfg.seed, stream::init));
}

double window_statistic(const SampleRef& reference, const SampleRef& window,
                        const ScanConfig& cfg, const NetworkParams& theta0,
                        std::uint64_t order_seed) {
  const TwoSample pair{reference, window};
  pair.validate();
  switch (cfg.statistic) {
    case Method::gaussian_mmd: {
      const SampleMatrix pool = stack_rows(reference, window);
      return mmd2_biased(make_gaussian(median_bandwidth_or_unit(pool)), pair);
    }
    case Method::ntk_exact:
      return mmd2_biased(make_ntk(theta0), pair);
    case Method::ntk_net: {
      TrainConfig train = cfg.train;
      train.order_seed = order_seed;
      return t_net(train_online(theta0, pair, train), pair);
    }
    case Method::hotelling:
      return hotelling_t2(pair);
    case Method::gaussian_mmd_linear:
      break;
  }
  throw InputError("unsupported scan statistic");
}

ChangePointTrace scan(const SampleRef& series, const ScanConfig& cfg,
                      std::optional<double> threshold) {
  cfg.validate();
  const long long total = series.rows();
  const long long first = static_cast<long long>(cfg.pilot_end) + cfg.window;
  if (total < first)
    throw InputError("series has " + std::to_string(total) + " rows; the scan needs at least " +
                     std::to_string(first));

  SampleMatrix data = series;
  const auto pilot_rows = series.middleRows(cfg.pilot_start, cfg.reference_size());
  if (cfg.standardize) data = Standardizer::fit(pilot_rows).apply(series);
  const SampleMatrix reference = data.middleRows(cfg.pilot_start, cfg.reference_size());
  const NetworkParams theta0 = scan_initial_params(cfg, static_cast<int>(series.cols()));
  const std::uint64_t order_root = derive_seed(cfg.seed, stream::order);

  ChangePointTrace trace;
  for (long long t = first; t <= total; t += cfg.stride) trace.times.push_back(t);
  trace.values.resize(trace.times.size());
  parallel_for(trace.times.size(), cfg.threads, [&](std::size_t i) {
    const long long t = trace.times[i];
    const auto win = data.middleRows(t - cfg.window, cfg.window);
    trace.values[i] = window_statistic(reference, win, cfg, theta0,
                                       derive_seed(order_root, static_cast<std::uint64_t>(t)));
  });
  if (threshold) trace.apply_threshold(*threshold);
  return trace;
}

BootstrapResult calibrate_pilot(const SampleRef& pool, const ScanConfig& cfg, int n_boot,
                                double alpha_level) {
  cfg.validate();
  if (n_boot < 1) throw InputError("n_boot must be positive");
  const long long need = static_cast<long long>(cfg.reference_size()) + cfg.window;
  if (pool.rows() < need)
    throw InputError("pilot pool has " + std::to_string(pool.rows()) +
                     " rows; calibration needs at least " + std::to_string(need));
  const SampleMatrix data = cfg.standardize ? Standardizer::fit(pool).apply(pool) : SampleMatrix(pool);
  const NetworkParams theta0 = scan_initial_params(cfg, static_cast<int>(pool.cols()));
  const std::uint64_t perm_seed = derive_seed(cfg.seed, stream::bootstrap);
  const std::uint64_t order_root =
      derive_seed(derive_seed(cfg.seed, stream::order), kCalibrationOrderStream);

  const auto ref = static_cast<std::size_t>(cfg.reference_size());
  const auto win = static_cast<std::size_t>(cfg.window);
  std::vector<double> nulls(static_cast<std::size_t>(n_boot));
  parallel_for(nulls.size(), cfg.threads, [&](std::size_t b) {
    const auto perm = draw_permutation(perm_seed, b, static_cast<std::size_t>(data.rows()));
    SampleMatrix reference(static_cast<Eigen::Index>(ref), data.cols());
    SampleMatrix window(static_cast<Eigen::Index>(win), data.cols());
    for (std::size_t i = 0; i < ref; ++i)
      reference.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(perm[i]));
    for (std::size_t i = 0; i < win; ++i)
      window.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(perm[ref + i]));
    nulls[b] = window_statistic(reference, window, cfg, theta0, derive_seed(order_root, b));
  });

  BootstrapResult r;
  r.threshold = empirical_quantile(nulls, 1.0 - alpha_level);
  r.null_samples = std::move(nulls);
  r.alpha_level = alpha_level;
  r.mode = BootstrapMode::pilot;
  if (cfg.statistic == Method::ntk_net) r.training_samples = static_cast<std::size_t>(n_boot) * (ref + win);
  return r;
}

SampleMatrix generate_change_series(int length, int dim, int change_at, double rho,
                                    std::uint64_t seed) {
  if (length < 1 || dim < 1) throw InputError("series length and dimension must be positive");
  if (!(rho >= 0.0)) throw InputError("rho must be nonnegative");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SampleMatrix s(length, dim);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = normal(rng);
  const double root = std::sqrt(rho);
  for (int t = std::max(change_at, 0); t < length; ++t) s.row(t).array() += root * normal(rng);
  return s;
}

}  // namespace ntkmmd
