#include "ntkmmd/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ntkmmd/error.hpp"
#include "ntkmmd/rng.hpp"

namespace ntkmmd {

void TwoSample::validate() const {
  if (x.rows() < 1 || y.rows() < 1) throw InputError("both sample lists must be nonempty");
  if (x.cols() != y.cols())
    throw InputError("sample lists have different dimensions (" + std::to_string(x.cols()) +
                     " vs " + std::to_string(y.cols()) + ")");
}

void SplitTwoSample::validate() const {
  train.validate();
  test.validate();
  if (train.dim() != test.dim()) throw InputError("train and test parts differ in dimension");
}

namespace {

SampleMatrix take_rows(const SampleMatrix& m, const std::vector<Eigen::Index>& idx,
                       std::size_t begin, std::size_t end) {
  SampleMatrix out(static_cast<Eigen::Index>(end - begin), m.cols());
  for (std::size_t i = begin; i < end; ++i)
    out.row(static_cast<Eigen::Index>(i - begin)) = m.row(idx[i]);
  return out;
}

std::pair<SampleMatrix, SampleMatrix> split_rows(const SampleMatrix& m, double fraction,
                                                 Rng& rng) {
  const auto n = static_cast<std::size_t>(m.rows());
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n)
    throw InputError("split leaves an empty train or test part (n = " + std::to_string(n) +
                     ", fraction = " + std::to_string(fraction) + ")");
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return {take_rows(m, idx, 0, n_train), take_rows(m, idx, n_train, n)};
}

double mean_of(const Matrix& m) { return m.sum() / static_cast<double>(m.size()); }

double off_diagonal_mean(const Matrix& m) {
  const double n = static_cast<double>(m.rows());
  if (m.rows() < 2) throw InputError("unbiased estimate needs at least 2 samples per group");
  return (m.sum() - m.trace()) / (n * (n - 1.0));
}

}  // namespace

SplitTwoSample split_two_sample(const TwoSample& data, double train_fraction,
                                std::uint64_t seed) {
  data.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InputError("train fraction must lie in (0, 1)");
  // Both samples restart from the same seed, so equal samples split equally.
  Rng rx = make_rng(seed);
  Rng ry = make_rng(seed);
  auto [x1, x2] = split_rows(data.x, train_fraction, rx);
  auto [y1, y2] = split_rows(data.y, train_fraction, ry);
  return SplitTwoSample{TwoSample{std::move(x1), std::move(y1)},
                        TwoSample{std::move(x2), std::move(y2)}, seed};
}

TwoSampleGram two_sample_gram(const KernelSpec& spec, const TwoSample& s) {
  s.validate();
  return TwoSampleGram{gram(spec, s.x, s.x).values, gram(spec, s.y, s.y).values,
                       gram(spec, s.x, s.y).values};
}

SplitGram split_gram(const KernelSpec& spec, const SplitTwoSample& s) {
  s.validate();
  return SplitGram{gram(spec, s.test.x, s.train.x).values, gram(spec, s.test.x, s.train.y).values,
                   gram(spec, s.test.y, s.train.x).values, gram(spec, s.test.y, s.train.y).values};
}

double mmd2_biased(const TwoSampleGram& g) {
  return mean_of(g.xx) + mean_of(g.yy) - 2.0 * mean_of(g.xy);
}

double mmd2_biased(const KernelSpec& spec, const TwoSample& s) {
  return mmd2_biased(two_sample_gram(spec, s));
}

double mmd2_unbiased(const TwoSampleGram& g) {
  return off_diagonal_mean(g.xx) + off_diagonal_mean(g.yy) - 2.0 * mean_of(g.xy);
}

double mmd2_unbiased(const KernelSpec& spec, const TwoSample& s) {
  s.validate();
  if (s.n_x() < 2 || s.n_y() < 2)
    throw InputError("unbiased estimate needs at least 2 samples per group");
  return mmd2_unbiased(two_sample_gram(spec, s));
}

double mmd2_asymmetric(const SplitGram& g) {
  return mean_of(g.x2x1) - mean_of(g.y2x1) - mean_of(g.x2y1) + mean_of(g.y2y1);
}

double mmd2_asymmetric(const KernelSpec& spec, const SplitTwoSample& s) {
  return mmd2_asymmetric(split_gram(spec, s));
}

LinearTimeMmd mmd2_linear_time(const KernelSpec& spec, const TwoSample& s) {
  s.validate();
  if (s.n_x() != s.n_y()) throw InputError("linear-time MMD needs n_x == n_y");
  const Eigen::Index pairs = s.n_x() / 2;
  if (pairs < 1) throw InputError("linear-time MMD needs at least two samples per list");
  double total = 0.0;
  for (Eigen::Index i = 0; i < pairs; ++i) {
    const auto x1 = s.x.row(2 * i).transpose();
    const auto x2 = s.x.row(2 * i + 1).transpose();
    const auto y1 = s.y.row(2 * i).transpose();
    const auto y2 = s.y.row(2 * i + 1).transpose();
    total += kernel_pair(spec, x1, x2) + kernel_pair(spec, y1, y2) - kernel_pair(spec, x1, y2) -
             kernel_pair(spec, x2, y1);
  }
  return LinearTimeMmd{total / static_cast<double>(pairs), s.n_x() % 2 == 1};
}

double witness_exact(const KernelSpec& spec, const TwoSample& train, const VectorRef& query) {
  train.validate();
  if (query.size() != train.dim()) throw InputError("witness query dimension mismatch");
  double sx = 0.0;
  for (Eigen::Index i = 0; i < train.n_x(); ++i)
    sx += kernel_pair(spec, query, train.x.row(i).transpose());
  double sy = 0.0;
  for (Eigen::Index j = 0; j < train.n_y(); ++j)
    sy += kernel_pair(spec, query, train.y.row(j).transpose());
  return sx / static_cast<double>(train.n_x()) - sy / static_cast<double>(train.n_y());
}

Vector witness_exact_batch(const KernelSpec& spec, const TwoSample& train,
                           const SampleRef& queries) {
  train.validate();
  if (queries.cols() != train.dim()) throw InputError("witness query dimension mismatch");
  return gram(spec, queries, train.x).values.rowwise().mean() -
         gram(spec, queries, train.y).values.rowwise().mean();
}

double witness_mean_difference(const VectorRef& values, Eigen::Index n_x) {
  const Eigen::Index n_y = values.size() - n_x;
  if (n_x < 1 || n_y < 1) throw InputError("witness values must cover both classes");
  return values.head(n_x).mean() - values.tail(n_y).mean();
}

SampleMatrix stack_rows(const SampleRef& a, const SampleRef& b) {
  if (a.cols() != b.cols()) throw InputError("cannot stack lists of different dimension");
  SampleMatrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

}  // namespace ntkmmd
