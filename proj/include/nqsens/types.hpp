#pragma once

#include <Eigen/Dense>
#include <complex>

namespace nqsens {

using Real = double;
using Complex = std::complex<double>;
using Index = Eigen::Index;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

}  // namespace nqsens
