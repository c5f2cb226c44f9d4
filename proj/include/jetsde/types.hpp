#pragma once

#include <Eigen/Dense>

namespace jetsde {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace jetsde
