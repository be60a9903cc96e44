#pragma once

#include <Eigen/Core>

namespace nested_eig {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace nested_eig
