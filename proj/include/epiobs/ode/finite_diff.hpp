/**
 * @file finite_diff.hpp
 * @brief Central finite-difference Jacobians.
 */
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "epiobs/types.hpp"

namespace epiobs {

using VectorMap = std::function<Vector(const Vector&)>;

/**
 * @brief Central-difference Jacobian of `map` at `point`.
 *
 * Step for coordinate i is cbrt(eps)·max(|point_i|, scale_i); `scale` may be empty
 * (all ones). Throws DomainError naming the coordinate when an evaluation is non-finite.
 */
[[nodiscard]] Matrix finite_diff_jacobian(const VectorMap& map, const Vector& point, const Vector& scale = {},
                                          const std::vector<std::string>& names = {});

}  // namespace epiobs
