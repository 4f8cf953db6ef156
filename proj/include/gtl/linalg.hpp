#pragma once

#include <Eigen/Dense>

namespace gtl {

template <typename Scalar>
using matrix_t = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using vector_t = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using matrix_d = matrix_t<double>;
using vector_d = vector_t<double>;

}  // namespace gtl
