#pragma once

#include <cstdint>

#include "ntkmmd/kernels.hpp"
#include "ntkmmd/types.hpp"

namespace ntkmmd {

/// Two sample lists of equal feature dimension, one sample per row.
struct TwoSample {
  SampleMatrix x;
  SampleMatrix y;

  Eigen::Index n_x() const noexcept { return x.rows(); }
  Eigen::Index n_y() const noexcept { return y.rows(); }
  Eigen::Index dim() const noexcept { return x.cols(); }

  /// Throws InputError unless both lists are nonempty with equal dimension.
  void validate() const;
};

/// Disjoint train/test partition of a TwoSample.
struct SplitTwoSample {
  TwoSample train;
  TwoSample test;
  std::uint64_t split_seed = 0;

  void validate() const;
};

/// Randomly partitions X and Y separately; round(train_fraction * n) samples
/// of each list go to the training part, the rest to the test part. Both
/// lists are shuffled by generators started from the same seed. Both parts of
/// each list must end up nonempty.
SplitTwoSample split_two_sample(const TwoSample& data, double train_fraction,
                                std::uint64_t seed);

/// Gram blocks of a TwoSample with itself.
struct TwoSampleGram {
  Matrix xx;
  Matrix yy;
  Matrix xy;
};

TwoSampleGram two_sample_gram(const KernelSpec& spec, const TwoSample& s);

/// Gram blocks between the test part (rows) and training part (columns).
struct SplitGram {
  Matrix x2x1;
  Matrix x2y1;
  Matrix y2x1;
  Matrix y2y1;
};

SplitGram split_gram(const KernelSpec& spec, const SplitTwoSample& s);

/// V-statistic estimate of MMD^2, diagonal terms included.
double mmd2_biased(const KernelSpec& spec, const TwoSample& s);
double mmd2_biased(const TwoSampleGram& g);

/// U-statistic estimate of MMD^2: within-group sums skip the diagonal.
double mmd2_unbiased(const KernelSpec& spec, const TwoSample& s);
double mmd2_unbiased(const TwoSampleGram& g);

/// Kernel integrated against (p1 - q1) x (p2 - q2) over the four
/// cross-split blocks.
double mmd2_asymmetric(const KernelSpec& spec, const SplitTwoSample& s);
double mmd2_asymmetric(const SplitGram& g);

struct LinearTimeMmd {
  double value = 0.0;
  /// True when n was odd and the last sample of each list was ignored.
  bool dropped_trailing = false;
};

/// Paired estimator over consecutive disjoint pairs in the given order,
/// h = K(x1,x2) + K(y1,y2) - K(x1,y2) - K(x2,y1), averaged over n/2 pairs.
/// Throws InputError if n_x != n_y or fewer than two samples per list.
LinearTimeMmd mmd2_linear_time(const KernelSpec& spec, const TwoSample& s);

/// (1/n_x) sum K(q, x_i) - (1/n_y) sum K(q, y_j).
double witness_exact(const KernelSpec& spec, const TwoSample& train, const VectorRef& query);

/// witness_exact for every row of `queries`.
Vector witness_exact_batch(const KernelSpec& spec, const TwoSample& train,
                           const SampleRef& queries);

/// Mean of `values` over the X rows minus mean over the Y rows of a test set
/// whose witness values have been concatenated as [X rows; Y rows].
double witness_mean_difference(const VectorRef& values, Eigen::Index n_x);

/// Rows of `a` followed by rows of `b`.
SampleMatrix stack_rows(const SampleRef& a, const SampleRef& b);

}  // namespace ntkmmd
