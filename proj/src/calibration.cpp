#include "ntkmmd/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ntkmmd/error.hpp"
#include "ntkmmd/parallel.hpp"
#include "ntkmmd/rng.hpp"

namespace ntkmmd {

std::string_view to_string(BootstrapMode m) {
  switch (m) {
    case BootstrapMode::test_only:
      return "test_only";
    case BootstrapMode::full_gram:
      return "full_gram";
    case BootstrapMode::full_retrain:
      return "full_retrain";
    case BootstrapMode::pilot:
      return "pilot";
    case BootstrapMode::permutation:
      return "permutation";
  }
  return "unknown";
}

double empirical_quantile(std::span<const double> values, double level) {
  if (values.empty()) throw InputError("quantile of an empty list");
  if (!(level > 0.0 && level < 1.0)) throw InputError("quantile level must lie in (0, 1)");
  const auto n = static_cast<long long>(values.size());
  long long k = static_cast<long long>(std::ceil(level * static_cast<double>(n + 1)));
  k = std::clamp(k, 1LL, n);
  std::vector<double> sorted(values.begin(), values.end());
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
  return sorted[static_cast<std::size_t>(k - 1)];
}

std::vector<std::size_t> draw_permutation(std::uint64_t seed, std::size_t draw, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(derive_seed(seed, draw));
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

double labelled_mean_difference(const VectorRef& values, std::span<const Label> labels) {
  if (static_cast<std::size_t>(values.size()) != labels.size())
    throw InputError("values and labels differ in length");
  double sx = 0.0, sy = 0.0;
  std::size_t nx = 0, ny = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == Label::x) {
      sx += values[static_cast<Eigen::Index>(i)];
      ++nx;
    } else {
      sy += values[static_cast<Eigen::Index>(i)];
      ++ny;
    }
  }
  if (nx == 0 || ny == 0) throw InputError("both classes must be present");
  return sx / static_cast<double>(nx) - sy / static_cast<double>(ny);
}

namespace {

void check_boot_args(int n_boot, double alpha_level) {
  if (n_boot < 1) throw InputError("n_boot must be positive");
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw InputError("alpha level must lie in (0, 1)");
}

BootstrapResult finish(std::vector<double> nulls, double alpha_level, BootstrapMode mode) {
  for (double v : nulls)
    if (!std::isfinite(v)) throw NumericalError("bootstrap produced a non-finite null sample");
  BootstrapResult r;
  r.threshold = empirical_quantile(nulls, 1.0 - alpha_level);
  r.null_samples = std::move(nulls);
  r.alpha_level = alpha_level;
  r.mode = mode;
  return r;
}

std::vector<Label> permuted(std::span<const Label> labels, const std::vector<std::size_t>& perm) {
  std::vector<Label> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[perm[i]];
  return out;
}

void check_both_classes(std::span<const Label> labels) {
  const auto nx = std::count(labels.begin(), labels.end(), Label::x);
  if (nx == 0 || nx == static_cast<std::ptrdiff_t>(labels.size()))
    throw InputError("labels contain a single class");
}

}  // namespace

BootstrapResult bootstrap_test_only(const VectorRef& witness_values, std::span<const Label> labels,
                                    int n_boot, double alpha_level, std::uint64_t seed,
                                    std::size_t threads) {
  check_boot_args(n_boot, alpha_level);
  if (static_cast<std::size_t>(witness_values.size()) != labels.size())
    throw InputError("witness values and labels differ in length");
  check_both_classes(labels);
  std::vector<double> nulls(static_cast<std::size_t>(n_boot));
  parallel_for(nulls.size(), threads, [&](std::size_t b) {
    const auto perm = draw_permutation(seed, b, labels.size());
    nulls[b] = labelled_mean_difference(witness_values, permuted(labels, perm));
  });
  return finish(std::move(nulls), alpha_level, BootstrapMode::test_only);
}

void PooledLayout::validate(std::size_t n) const {
  if (labels.size() != n) throw InputError("layout label count does not match the gram block");
  if (!roles.empty() && roles.size() != n)
    throw InputError("layout role count does not match the gram block");
  if (roles.empty()) {
    check_both_classes(labels);
    return;
  }
  std::size_t counts[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < n; ++i)
    ++counts[static_cast<int>(roles[i])][static_cast<int>(labels[i])];
  for (auto& row : counts)
    for (std::size_t c : row)
      if (c == 0) throw InputError("asymmetric layout has an empty split part");
}

PooledLayout symmetric_layout(Eigen::Index n_x, Eigen::Index n_y) {
  PooledLayout l;
  l.labels.assign(static_cast<std::size_t>(n_x), Label::x);
  l.labels.insert(l.labels.end(), static_cast<std::size_t>(n_y), Label::y);
  return l;
}

PooledLayout split_layout(const SplitTwoSample& s) {
  PooledLayout l;
  auto add = [&](Eigen::Index n, Label label, Role role) {
    l.labels.insert(l.labels.end(), static_cast<std::size_t>(n), label);
    l.roles.insert(l.roles.end(), static_cast<std::size_t>(n), role);
  };
  add(s.train.n_x(), Label::x, Role::train);
  add(s.train.n_y(), Label::y, Role::train);
  add(s.test.n_x(), Label::x, Role::test);
  add(s.test.n_y(), Label::y, Role::test);
  return l;
}

SampleMatrix pooled_rows(const SplitTwoSample& s) {
  return stack_rows(stack_rows(s.train.x, s.train.y), stack_rows(s.test.x, s.test.y));
}

namespace {

// Per-index signed weights 1/n_x (x) and -1/n_y (y) over the indices selected by `keep`.
template <typename Keep>
Vector signed_weights(const std::vector<Label>& labels, Keep keep) {
  double nx = 0, ny = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (keep(i)) (labels[i] == Label::x ? nx : ny) += 1.0;
  Vector w = Vector::Zero(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (keep(i)) w[static_cast<Eigen::Index>(i)] = labels[i] == Label::x ? 1.0 / nx : -1.0 / ny;
  return w;
}

std::vector<Eigen::Index> indices_with(const std::vector<Role>& roles, Role r) {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < roles.size(); ++i)
    if (roles[i] == r) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

Vector witness_from(const GramBlock& pooled, const std::vector<Label>& labels,
                    const std::vector<Role>& roles) {
  const Vector v = signed_weights(labels, [&](std::size_t i) { return roles[i] == Role::train; });
  const auto test = indices_with(roles, Role::test);
  Vector w(static_cast<Eigen::Index>(test.size()));
  for (std::size_t k = 0; k < test.size(); ++k) w[static_cast<Eigen::Index>(k)] = pooled.values.row(test[k]).dot(v);
  return w;
}

std::vector<Label> test_labels(const PooledLayout& layout) {
  std::vector<Label> out;
  for (std::size_t i = 0; i < layout.labels.size(); ++i)
    if (layout.roles[i] == Role::test) out.push_back(layout.labels[i]);
  return out;
}

}  // namespace

double pooled_statistic(const GramBlock& pooled, const PooledLayout& layout) {
  if (pooled.rows() != pooled.cols()) throw InputError("pooled gram block must be square");
  layout.validate(static_cast<std::size_t>(pooled.rows()));
  if (!layout.asymmetric()) {
    const Vector w = signed_weights(layout.labels, [](std::size_t) { return true; });
    return w.dot(pooled.values * w);
  }
  return labelled_mean_difference(witness_from(pooled, layout.labels, layout.roles),
                                  test_labels(layout));
}

Vector pooled_witness(const GramBlock& pooled, const PooledLayout& layout) {
  if (!layout.asymmetric()) throw InputError("pooled witness needs a split layout");
  layout.validate(static_cast<std::size_t>(pooled.rows()));
  return witness_from(pooled, layout.labels, layout.roles);
}

BootstrapResult bootstrap_full_gram(const GramBlock& pooled, const PooledLayout& layout,
                                    int n_boot, double alpha_level, std::uint64_t seed,
                                    const FullGramOptions& options, std::size_t threads) {
  check_boot_args(n_boot, alpha_level);
  if (pooled.rows() != pooled.cols()) throw InputError("pooled gram block must be square");
  const auto n = static_cast<std::size_t>(pooled.rows());
  layout.validate(n);
  if (options.scope == PermutationScope::test_only && !layout.asymmetric())
    throw InputError("test-only permutation scope needs a split layout");

  // Quantities that do not depend on the draw in test-only scope.
  Vector fixed_witness;
  std::vector<Label> fixed_test_labels;
  if (options.scope == PermutationScope::test_only) {
    fixed_witness = witness_from(pooled, layout.labels, layout.roles);
    fixed_test_labels = test_labels(layout);
  }

  std::vector<double> nulls(static_cast<std::size_t>(n_boot));
  parallel_for(nulls.size(), threads, [&](std::size_t b) {
    const bool identity = options.include_identity && b == 0;
    if (options.scope == PermutationScope::test_only) {
      const std::size_t m = fixed_test_labels.size();
      std::vector<std::size_t> perm(m);
      if (identity)
        std::iota(perm.begin(), perm.end(), std::size_t{0});
      else
        perm = draw_permutation(seed, b, m);
      nulls[b] = labelled_mean_difference(fixed_witness, permuted(fixed_test_labels, perm));
      return;
    }
    std::vector<std::size_t> perm(n);
    if (identity)
      std::iota(perm.begin(), perm.end(), std::size_t{0});
    else
      perm = draw_permutation(seed, b, n);
    PooledLayout relabelled;
    relabelled.labels = permuted(layout.labels, perm);
    if (layout.asymmetric()) {
      relabelled.roles.resize(n);
      for (std::size_t i = 0; i < n; ++i) relabelled.roles[i] = layout.roles[perm[i]];
    }
    nulls[b] = pooled_statistic(pooled, relabelled);
  });
  return finish(std::move(nulls), alpha_level, BootstrapMode::full_gram);
}

BootstrapResult bootstrap_full_retrain(const SplitTwoSample& split, const NetworkParams& theta0,
                                       const TrainConfig& train, int n_boot, double alpha_level,
                                       std::uint64_t seed, const RetrainOptions& options,
                                       std::size_t threads) {
  check_boot_args(n_boot, alpha_level);
  split.validate();
  const SampleMatrix pool = pooled_rows(split);
  const PooledLayout layout = split_layout(split);
  const auto n = static_cast<std::size_t>(pool.rows());

  std::vector<double> nulls(static_cast<std::size_t>(n_boot));
  std::vector<std::size_t> seen(nulls.size());
  parallel_for(nulls.size(), threads, [&](std::size_t b) {
    std::vector<std::size_t> perm(n);
    if (options.include_identity && b == 0)
      std::iota(perm.begin(), perm.end(), std::size_t{0});
    else
      perm = draw_permutation(seed, b, n);
    // Sample i takes the (label, role) cell of index perm[i].
    std::vector<Eigen::Index> cells[2][2];
    for (std::size_t i = 0; i < n; ++i)
      cells[static_cast<int>(layout.roles[perm[i]])][static_cast<int>(layout.labels[perm[i]])]
          .push_back(static_cast<Eigen::Index>(i));
    auto gather = [&](const std::vector<Eigen::Index>& idx) {
      SampleMatrix m(static_cast<Eigen::Index>(idx.size()), pool.cols());
      for (std::size_t k = 0; k < idx.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = pool.row(idx[k]);
      return m;
    };
    const int tr = static_cast<int>(Role::train), te = static_cast<int>(Role::test);
    const int lx = static_cast<int>(Label::x), ly = static_cast<int>(Label::y);
    const TwoSample train_part{gather(cells[tr][lx]), gather(cells[tr][ly])};
    const TwoSample test_part{gather(cells[te][lx]), gather(cells[te][ly])};
    TrainedPair tp;
    try {
      tp = train_online(theta0, train_part, train);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.step(), "bootstrap draw " + std::to_string(b));
    }
    seen[b] = tp.samples_seen;
    nulls[b] = t_net(tp, test_part);
  });
  auto r = finish(std::move(nulls), alpha_level, BootstrapMode::full_retrain);
  r.training_samples = std::accumulate(seen.begin(), seen.end(), std::size_t{0});
  return r;
}

BootstrapResult bootstrap_full_retrain(const TwoSample& data, double train_fraction,
                                       const NetworkConfig& net, TrainConfig train, int n_boot,
                                       double alpha_level, std::uint64_t root_seed,
                                       const RetrainOptions& options, std::size_t threads) {
  const SplitTwoSample split =
      split_two_sample(data, train_fraction, derive_seed(root_seed, stream::split));
  NetworkConfig cfg = net;
  cfg.input_dim = static_cast<int>(data.dim());
  const NetworkParams theta0 = init_params(cfg, derive_seed(root_seed, stream::init));
  train.order_seed = derive_seed(root_seed, stream::order);
  return bootstrap_full_retrain(split, theta0, train, n_boot, alpha_level,
                                derive_seed(root_seed, stream::bootstrap), options, threads);
}

NuEstimate estimate_nu(const KernelSpec& spec, const TwoSample& s) {
  s.validate();
  if (s.n_x() < 2 || s.n_y() < 2) throw InputError("nu estimation needs 2 samples per group");
  const TwoSampleGram g = two_sample_gram(spec, s);
  auto off_diag_sq_mean = [](const Matrix& m) {
    const double n = static_cast<double>(m.rows());
    return (m.array().square().sum() - m.diagonal().array().square().sum()) / (n * (n - 1.0));
  };
  NuEstimate e;
  e.pp = off_diag_sq_mean(g.xx);
  e.qq = off_diag_sq_mean(g.yy);
  e.pq = g.xy.array().square().mean();
  e.max = std::max({e.pp, e.pq, e.qq});
  return e;
}

std::string_view to_string(ThresholdVariant v) {
  switch (v) {
    case ThresholdVariant::thm1:
      return "thm1";
    case ThresholdVariant::thm2:
      return "thm2";
    case ThresholdVariant::thm3:
      return "thm3";
  }
  return "unknown";
}

ThresholdVariant parse_threshold_variant(std::string_view name) {
  if (name == "thm1") return ThresholdVariant::thm1;
  if (name == "thm2") return ThresholdVariant::thm2;
  if (name == "thm3") return ThresholdVariant::thm3;
  throw InputError("unknown threshold variant '" + std::string(name) + "'");
}

void ThresholdParams::validate() const {
  if (n < 1) throw InputError("n must be positive");
  if (!(c > 0.0 && c < 1.0)) throw InputError("c must lie in (0, 1)");
  if (!(nu > 0.0 && nu <= 1.0)) throw InputError("nu must lie in (0, 1]");
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (variant == ThresholdVariant::thm2 && !(gamma > 0.0 && gamma < 1.0))
    throw InputError("gamma must lie in (0, 1)");
}

double theoretical_threshold(const ThresholdParams& tp) {
  tp.validate();
  const double cn = tp.c * static_cast<double>(tp.n);
  const double root = std::sqrt(tp.nu / cn);
  switch (tp.variant) {
    case ThresholdVariant::thm1: {
      const double l1 = std::sqrt(8.0 * std::log(4.0 / tp.alpha_level));
      return 4.0 / cn + 4.0 * l1 * root;
    }
    case ThresholdVariant::thm2: {
      const double l21 = std::sqrt(4.0 * std::log(4.0 / tp.alpha_level));
      const double l1g = std::sqrt(4.0 * std::log(8.0 / tp.gamma));
      return 4.0 * (std::sqrt(1.1) * l21 + l1g) * root;
    }
    case ThresholdVariant::thm3: {
      const double l1 = std::sqrt(8.0 * std::log(4.0 / tp.alpha_level));
      return 4.0 * l1 * root;
    }
  }
  throw InputError("unknown threshold variant");
}

}  // namespace ntkmmd
