#pragma once

#include <Eigen/Core>

namespace ntkmmd {

/// Dense row-major matrix. Sample lists store one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using SampleMatrix = Matrix;

using VectorRef = Eigen::Ref<const Vector>;
using SampleRef = Eigen::Ref<const SampleMatrix>;

}  // namespace ntkmmd
