#pragma once

#include <Eigen/Core>

namespace cbw {

using Scalar = double;

using Vec = Eigen::VectorX<Scalar>;
using Mat = Eigen::MatrixX<Scalar>;

// row-major variant for matrices indexed by sparse feature rows
using MatRow = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;

}  // namespace cbw
