#pragma once

#include <Eigen/Dense>

namespace nrlearn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexVector = Eigen::VectorXi;

} // namespace nrlearn
