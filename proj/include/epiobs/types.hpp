/**
 * @file types.hpp
 * @brief Dense linear-algebra aliases.
 */
#pragma once

#include <Eigen/Dense>

namespace epiobs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace epiobs
