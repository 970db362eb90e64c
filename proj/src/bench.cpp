#include "ntkmmd/bench.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ntkmmd/error.hpp"
#include "ntkmmd/kernels.hpp"
#include "ntkmmd/parallel.hpp"
#include "ntkmmd/rng.hpp"

namespace ntkmmd {

std::string_view to_string(ShiftKind k) {
  switch (k) {
    case ShiftKind::null:
      return "null";
    case ShiftKind::mean_shift:
      return "mean_shift";
    case ShiftKind::cov_shift:
      return "cov_shift";
  }
  return "unknown";
}

ShiftKind parse_shift_kind(std::string_view name) {
  if (name == "null") return ShiftKind::null;
  if (name == "mean_shift" || name == "mean-shift" || name == "mean") return ShiftKind::mean_shift;
  if (name == "cov_shift" || name == "cov-shift" || name == "cov") return ShiftKind::cov_shift;
  throw InputError("unknown shift kind '" + std::string(name) + "'");
}

void ShiftSpec::validate() const {
  if (dim < 1) throw InputError("dimension must be positive");
  if (n_x < 1 || n_y < 1) throw InputError("sample sizes must be positive");
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude))
    throw InputError("shift magnitude must be a nonnegative real");
}

TwoSample generate(const ShiftSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](int n) {
    SampleMatrix m(n, spec.dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  TwoSample s{draw(spec.n_x), draw(spec.n_y)};
  switch (spec.kind) {
    case ShiftKind::null:
      break;
    case ShiftKind::mean_shift:
      s.y.col(0).array() += spec.magnitude;
      break;
    case ShiftKind::cov_shift: {
      // y = z + sqrt(rho) g 1 has covariance I + rho E.
      const double root = std::sqrt(spec.magnitude);
      for (Eigen::Index i = 0; i < s.y.rows(); ++i) s.y.row(i).array() += root * normal(rng);
      break;
    }
  }
  return s;
}

namespace {

struct HotellingParts {
  Vector mean_x;
  Vector mean_y;
  Matrix scatter;  // within-group scatter
};

HotellingParts hotelling_parts(const TwoSample& s) {
  HotellingParts p;
  p.mean_x = s.x.colwise().mean().transpose();
  p.mean_y = s.y.colwise().mean().transpose();
  const Matrix cx = s.x.rowwise() - p.mean_x.transpose();
  const Matrix cy = s.y.rowwise() - p.mean_y.transpose();
  p.scatter = cx.transpose() * cx + cy.transpose() * cy;
  return p;
}

void check_hotelling_size(const TwoSample& s) {
  s.validate();
  const auto dof = s.n_x() + s.n_y() - 2;
  if (dof < s.dim())
    throw InputError("Hotelling needs n_x + n_y - 2 >= d (have " + std::to_string(dof) +
                     " < " + std::to_string(s.dim()) + "): pooled covariance is singular");
}

}  // namespace

double hotelling_t2(const TwoSample& s) {
  check_hotelling_size(s);
  const HotellingParts p = hotelling_parts(s);
  const double nx = static_cast<double>(s.n_x()), ny = static_cast<double>(s.n_y());
  const Matrix pooled = p.scatter / (nx + ny - 2.0);
  Eigen::LDLT<Matrix> ldlt(pooled);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff()))
    throw InputError("pooled covariance is singular (rank-deficient data)");
  const Vector diff = p.mean_x - p.mean_y;
  return nx * ny / (nx + ny) * diff.dot(ldlt.solve(diff));
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::ntk_net:
      return "ntk_net";
    case Method::ntk_exact:
      return "ntk_exact";
    case Method::gaussian_mmd:
      return "gaussian_mmd";
    case Method::gaussian_mmd_linear:
      return "gaussian_mmd_linear";
    case Method::hotelling:
      return "hotelling";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "ntk_net") return Method::ntk_net;
  if (s == "ntk_exact") return Method::ntk_exact;
  if (s == "gaussian_mmd") return Method::gaussian_mmd;
  if (s == "gaussian_mmd_linear") return Method::gaussian_mmd_linear;
  if (s == "hotelling") return Method::hotelling;
  throw InputError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Calibration c) {
  switch (c) {
    case Calibration::automatic:
      return "auto";
    case Calibration::test_only:
      return "test_only";
    case Calibration::full_gram:
      return "full_gram";
    case Calibration::full_retrain:
      return "full_retrain";
    case Calibration::permutation:
      return "permutation";
  }
  return "unknown";
}

Calibration parse_calibration(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "auto" || s == "automatic") return Calibration::automatic;
  if (s == "test_only") return Calibration::test_only;
  if (s == "full_gram") return Calibration::full_gram;
  if (s == "full_retrain") return Calibration::full_retrain;
  if (s == "permutation") return Calibration::permutation;
  throw InputError("unknown calibration '" + std::string(name) + "'");
}

NetworkConfig NetworkShape::with_input_dim(int d) const {
  NetworkConfig c{d, hidden_widths, activation, train_output_layer};
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (n_boot < 1) throw InputError("n_boot must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InputError("train fraction must lie in (0, 1)");
  train.validate();
  (void)resolve_calibration(method, calibration);
}

Calibration resolve_calibration(Method m, Calibration c) {
  auto bad = [&] {
    return InputError("calibration '" + std::string(to_string(c)) + "' is not available for " +
                      std::string(to_string(m)));
  };
  switch (m) {
    case Method::ntk_net:
      if (c == Calibration::automatic) return Calibration::test_only;
      if (c == Calibration::test_only || c == Calibration::full_retrain) return c;
      throw bad();
    case Method::ntk_exact:
      if (c == Calibration::automatic) return Calibration::test_only;
      if (c == Calibration::test_only || c == Calibration::full_gram) return c;
      throw bad();
    case Method::gaussian_mmd:
      if (c == Calibration::automatic || c == Calibration::permutation)
        return Calibration::full_gram;
      if (c == Calibration::full_gram) return c;
      throw bad();
    case Method::gaussian_mmd_linear:
    case Method::hotelling:
      if (c == Calibration::automatic || c == Calibration::permutation)
        return Calibration::permutation;
      throw bad();
  }
  throw bad();
}

namespace {

std::vector<Label> test_label_list(const TwoSample& test) {
  std::vector<Label> labels(static_cast<std::size_t>(test.n_x()), Label::x);
  labels.insert(labels.end(), static_cast<std::size_t>(test.n_y()), Label::y);
  return labels;
}

// Permutation null for statistics recomputed from relabelled raw samples.
template <typename Stat>
BootstrapResult permutation_null(const TwoSample& data, int n_boot, double alpha_level,
                                 std::uint64_t seed, Stat stat) {
  const SampleMatrix pool = stack_rows(data.x, data.y);
  const auto n = static_cast<std::size_t>(pool.rows());
  std::vector<double> nulls(static_cast<std::size_t>(n_boot));
  for (std::size_t b = 0; b < nulls.size(); ++b) {
    const auto perm = draw_permutation(seed, b, n);
    std::vector<std::size_t> first(perm.begin(), perm.begin() + data.n_x());
    std::vector<std::size_t> second(perm.begin() + data.n_x(), perm.end());
    nulls[b] = stat(pool, first, second);
  }
  BootstrapResult r;
  r.threshold = empirical_quantile(nulls, 1.0 - alpha_level);
  r.null_samples = std::move(nulls);
  r.alpha_level = alpha_level;
  r.mode = BootstrapMode::permutation;
  return r;
}

// Hotelling null by permutation. The total scatter T is permutation
// invariant, so with D = d^T T^{-1} d and k = n_x n_y / n the statistic is
// k (n - 2) D / (1 - k D), one O(n d + d^2) evaluation per draw.
BootstrapResult hotelling_null(const TwoSample& data, int n_boot, double alpha_level,
                               std::uint64_t seed) {
  const SampleMatrix pool = stack_rows(data.x, data.y);
  const Vector grand = pool.colwise().mean().transpose();
  const Matrix centered = pool.rowwise() - grand.transpose();
  Eigen::LDLT<Matrix> total(centered.transpose() * centered);
  if (total.info() != Eigen::Success) throw InputError("pooled covariance is singular");
  const double nx = static_cast<double>(data.n_x()), ny = static_cast<double>(data.n_y());
  const double n = nx + ny, k = nx * ny / n;
  return permutation_null(data, n_boot, alpha_level, seed,
                          [&](const SampleMatrix& z, const std::vector<std::size_t>& a,
                              const std::vector<std::size_t>& b) {
                            Vector sa = Vector::Zero(z.cols()), sb = Vector::Zero(z.cols());
                            for (auto i : a) sa += z.row(static_cast<Eigen::Index>(i)).transpose();
                            for (auto i : b) sb += z.row(static_cast<Eigen::Index>(i)).transpose();
                            const Vector diff = sa / nx - sb / ny;
                            const double dd = diff.dot(total.solve(diff));
                            return k * (n - 2.0) * dd / (1.0 - k * dd);
                          });
}

BootstrapResult linear_null(const TwoSample& data, const KernelSpec& spec, int n_boot,
                            double alpha_level, std::uint64_t seed) {
  return permutation_null(data, n_boot, alpha_level, seed,
                          [&](const SampleMatrix& z, const std::vector<std::size_t>& a,
                              const std::vector<std::size_t>& b) {
                            TwoSample s{SampleMatrix(static_cast<Eigen::Index>(a.size()), z.cols()),
                                        SampleMatrix(static_cast<Eigen::Index>(b.size()), z.cols())};
                            for (std::size_t i = 0; i < a.size(); ++i)
                              s.x.row(static_cast<Eigen::Index>(i)) = z.row(static_cast<Eigen::Index>(a[i]));
                            for (std::size_t i = 0; i < b.size(); ++i)
                              s.y.row(static_cast<Eigen::Index>(i)) = z.row(static_cast<Eigen::Index>(b[i]));
                            return mmd2_linear_time(spec, s).value;
                          });
}

void settle(TestOutcome& out, BootstrapResult boot, bool keep_nulls) {
  out.threshold = boot.threshold;
  out.reject = out.statistic > out.threshold;
  if (!keep_nulls) {
    boot.null_samples.clear();
    boot.null_samples.shrink_to_fit();
  }
  out.bootstrap = std::move(boot);
}

TestOutcome run_ntk_net(const TwoSample& data, const RunConfig& cfg, std::uint64_t seed,
                        Calibration cal) {
  const SplitTwoSample split =
      split_two_sample(data, cfg.train_fraction, derive_seed(seed, stream::split));
  const NetworkParams theta0 = init_params(cfg.network.with_input_dim(static_cast<int>(data.dim())),
                                           derive_seed(seed, stream::init));
  TrainConfig train = cfg.train;
  train.order_seed = derive_seed(seed, stream::order);
  const std::uint64_t boot_seed = derive_seed(seed, stream::bootstrap);

  const SampleMatrix test_rows = stack_rows(split.test.x, split.test.y);
  const auto labels = test_label_list(split.test);

  TestOutcome out;
  out.method = Method::ntk_net;
  out.calibration = cal;

  CheckpointFn on_checkpoint;
  if (!cfg.checkpoints.empty() && cal == Calibration::test_only) {
    train.checkpoint_every = 1;
    on_checkpoint = [&](std::size_t seen, const NetworkParams& current) {
      if (std::find(cfg.checkpoints.begin(), cfg.checkpoints.end(), seen) == cfg.checkpoints.end())
        return;
      const Vector w = witness_net_batch(theta0, current, train.learning_rate * train.epochs,
                                         test_rows);
      const double stat = labelled_mean_difference(w, labels);
      const auto boot = bootstrap_test_only(w, labels, cfg.n_boot, cfg.alpha_level, boot_seed, 1);
      out.trace.push_back({seen, stat, boot.threshold, stat > boot.threshold});
    };
  }
  const TrainedPair tp = train_online(theta0, split.train, train, on_checkpoint);
  const Vector witness = witness_net_batch(tp, test_rows);
  out.statistic = labelled_mean_difference(witness, labels);

  if (cal == Calibration::test_only) {
    settle(out, bootstrap_test_only(witness, labels, cfg.n_boot, cfg.alpha_level, boot_seed,
                                    cfg.threads),
           cfg.keep_null_samples);
  } else {
    settle(out, bootstrap_full_retrain(split, theta0, train, cfg.n_boot, cfg.alpha_level,
                                       boot_seed, {}, cfg.threads),
           cfg.keep_null_samples);
  }
  return out;
}

TestOutcome run_ntk_exact(const TwoSample& data, const RunConfig& cfg, std::uint64_t seed,
                          Calibration cal) {
  const SplitTwoSample split =
      split_two_sample(data, cfg.train_fraction, derive_seed(seed, stream::split));
  const NetworkParams theta0 = init_params(cfg.network.with_input_dim(static_cast<int>(data.dim())),
                                           derive_seed(seed, stream::init));
  const KernelSpec kernel = make_ntk(theta0);
  const std::uint64_t boot_seed = derive_seed(seed, stream::bootstrap);

  TestOutcome out;
  out.method = Method::ntk_exact;
  out.calibration = cal;
  if (cal == Calibration::test_only) {
    const SampleMatrix test_rows = stack_rows(split.test.x, split.test.y);
    const auto labels = test_label_list(split.test);
    const Vector witness = witness_exact_batch(kernel, split.train, test_rows);
    out.statistic = labelled_mean_difference(witness, labels);
    settle(out, bootstrap_test_only(witness, labels, cfg.n_boot, cfg.alpha_level, boot_seed,
                                    cfg.threads),
           cfg.keep_null_samples);
  } else {
    const SampleMatrix pool = pooled_rows(split);
    const GramBlock pooled = gram(kernel, pool, pool);
    const PooledLayout layout = split_layout(split);
    out.statistic = pooled_statistic(pooled, layout);
    settle(out, bootstrap_full_gram(pooled, layout, cfg.n_boot, cfg.alpha_level, boot_seed, {},
                                    cfg.threads),
           cfg.keep_null_samples);
  }
  return out;
}

TestOutcome run_gaussian(const TwoSample& data, const RunConfig& cfg, std::uint64_t seed,
                         Calibration cal) {
  const SampleMatrix pool = stack_rows(data.x, data.y);
  const KernelSpec kernel = make_gaussian(median_bandwidth_or_unit(pool));
  const std::uint64_t boot_seed = derive_seed(seed, stream::bootstrap);
  TestOutcome out;
  out.method = cfg.method;
  out.calibration = cal;
  if (cfg.method == Method::gaussian_mmd) {
    const GramBlock pooled = gram(kernel, pool, pool);
    const PooledLayout layout = symmetric_layout(data.n_x(), data.n_y());
    out.statistic = pooled_statistic(pooled, layout);
    settle(out, bootstrap_full_gram(pooled, layout, cfg.n_boot, cfg.alpha_level, boot_seed, {},
                                    cfg.threads),
           cfg.keep_null_samples);
  } else {
    out.statistic = mmd2_linear_time(kernel, data).value;
    settle(out, linear_null(data, kernel, cfg.n_boot, cfg.alpha_level, boot_seed),
           cfg.keep_null_samples);
  }
  return out;
}

TestOutcome run_hotelling(const TwoSample& data, const RunConfig& cfg, std::uint64_t seed,
                          Calibration cal) {
  TestOutcome out;
  out.method = Method::hotelling;
  out.calibration = cal;
  out.statistic = hotelling_t2(data);
  settle(out, hotelling_null(data, cfg.n_boot, cfg.alpha_level, derive_seed(seed, stream::bootstrap)),
         cfg.keep_null_samples);
  return out;
}

}  // namespace

TestOutcome run_test(const TwoSample& data, const RunConfig& config, std::uint64_t seed) {
  config.validate();
  data.validate();
  const Calibration cal = resolve_calibration(config.method, config.calibration);
  switch (config.method) {
    case Method::ntk_net:
      return run_ntk_net(data, config, seed, cal);
    case Method::ntk_exact:
      return run_ntk_exact(data, config, seed, cal);
    case Method::gaussian_mmd:
    case Method::gaussian_mmd_linear:
      return run_gaussian(data, config, seed, cal);
    case Method::hotelling:
      return run_hotelling(data, config, seed, cal);
  }
  throw InputError("unknown method");
}

std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) throw InputError("Wilson interval needs at least one trial");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  // Rounding can leave p just outside [lo, hi] at 0 or n successes.
  return {std::clamp(center - half, 0.0, p), std::clamp(center + half, p, 1.0)};
}

PowerEstimate make_power_estimate(std::size_t rejections, std::size_t n_run) {
  PowerEstimate e;
  e.n_run = n_run;
  e.rejections = rejections;
  e.power = static_cast<double>(rejections) / static_cast<double>(n_run);
  e.wilson_ci_95 = wilson_interval(rejections, n_run);
  return e;
}

PowerStudy estimate_power(const ShiftSpec& spec, const RunConfig& config, std::size_t n_run,
                          std::uint64_t root_seed) {
  if (n_run < 1) throw InputError("n_run must be positive");
  spec.validate();
  config.validate();
  const std::size_t outer = config.threads == 0 ? default_thread_count() : config.threads;
  RunConfig inner = config;
  inner.threads = 1;

  PowerStudy study;
  study.replicas.resize(n_run);
  parallel_for(n_run, outer, [&](std::size_t r) {
    const std::uint64_t replica_seed = derive_seed(root_seed, r);
    ShiftSpec s = spec;
    s.seed = derive_seed(replica_seed, stream::data);
    study.replicas[r] = run_test(generate(s), inner, replica_seed);
  });

  std::size_t rejections = 0;
  for (const auto& o : study.replicas) rejections += o.reject ? 1 : 0;
  study.overall = make_power_estimate(rejections, n_run);

  for (std::size_t c = 0; c < config.checkpoints.size(); ++c) {
    const std::size_t at = config.checkpoints[c];
    std::size_t hits = 0, seen = 0;
    for (const auto& o : study.replicas)
      for (const auto& cp : o.trace)
        if (cp.samples_seen == at) {
          ++seen;
          hits += cp.reject ? 1 : 0;
        }
    if (seen > 0) study.curve.emplace_back(at, make_power_estimate(hits, seen));
  }
  return study;
}

double loglog_slope(const std::vector<std::pair<double, double>>& xy) {
  if (xy.size() < 2) throw InputError("slope needs at least two points");
  double mx = 0, my = 0;
  for (const auto& [x, y] : xy) {
    if (!(x > 0.0 && y > 0.0)) throw InputError("log-log slope needs positive values");
    mx += std::log(x);
    my += std::log(y);
  }
  const double n = static_cast<double>(xy.size());
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (const auto& [x, y] : xy) {
    sxy += (std::log(x) - mx) * (std::log(y) - my);
    sxx += (std::log(x) - mx) * (std::log(x) - mx);
  }
  return sxy / sxx;
}

ErrorStudy ntk_error_study(const ShiftSpec& spec, const NetworkShape& shape,
                           const std::vector<double>& alphas, std::uint64_t seed,
                           const TrainConfig& base) {
  if (alphas.size() < 3) throw InputError("error study needs at least 3 learning rates");
  const auto [lo, hi] = std::minmax_element(alphas.begin(), alphas.end());
  if (!(*lo > 0.0) || *hi / *lo < 10.0 - 1e-9)
    throw InputError("learning rates must be positive and span at least one decade");

  const TwoSample data = generate(spec);
  const NetworkParams theta0 =
      init_params(shape.with_input_dim(spec.dim), derive_seed(seed, stream::init));
  ErrorStudy study;
  study.t_ntk = mmd2_biased(make_ntk_feature(theta0), data);
  if (std::abs(study.t_ntk) < 1e-12)
    throw NumericalError("exact NTK statistic is numerically zero; relative error undefined");

  TrainConfig cfg = base;
  cfg.order_seed = derive_seed(seed, stream::order);
  for (double alpha : alphas) {
    cfg.learning_rate = alpha;
    const TrainedPair tp = train_online(theta0, data, cfg);
    const double t = t_net(tp, data);
    study.t_net.push_back(t);
    study.pairs.emplace_back(alpha, std::abs(t - study.t_ntk) / std::abs(study.t_ntk));
  }
  study.slope = loglog_slope(study.pairs);
  return study;
}

}  // namespace ntkmmd
