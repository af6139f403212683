#pragma once

#include <Eigen/Core>
#include <complex>

namespace koopgen {

using Index = Eigen::Index;
using Complex = std::complex<double>;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// One sample per row.
using PointSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>;

using VecRef = Eigen::Ref<const Vec>;

}  // namespace koopgen
