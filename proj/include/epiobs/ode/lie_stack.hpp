/**
 * @file lie_stack.hpp
 * @brief Numerical Lie-derivative stacks (y, ẏ, …, y^(k)) and their Jacobians.
 */
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "epiobs/ode/model.hpp"

namespace epiobs {

struct LieOptions {
  bool augment{false};
  /// Indices of θ treated as unknown when augmenting (empty = all parameters).
  std::vector<std::size_t> unknown_params;
  /// Time at which the (frozen) vector field is evaluated.
  double t{0.0};
  /// Multiplier on the automatic finite-difference step (mainly for testing).
  double step_factor{1.0};
};

/**
 * @brief Stack of output derivatives at a point and its Jacobian.
 *
 * `values` holds m·(k+1) entries ordered (y, ẏ, …, y^(k)), each block of size m.
 * `jacobian` has one column per coordinate of `point` (x, or x followed by the
 * unknown parameters when augmented).
 */
struct LieStack {
  Vector point;
  std::size_t order{0};
  std::size_t n_outputs{0};
  Vector values;
  Matrix jacobian;
  /// Difference between Jacobian estimates at two step sizes (finite-difference error proxy).
  Matrix jacobian_error;
  /// Characteristic scale of each coordinate of `point` (max(|z_i|, declared scale)).
  Vector point_scales;
  /// Set when finite-difference noise swamps part of the stack.
  bool noise_warning{false};

  /// Block i of `values` (the i-th derivative of y).
  [[nodiscard]] Vector value(std::size_t i) const { return values.segment(i * n_outputs, n_outputs); }
};

/**
 * @brief Lie derivatives L_f^i h, i = 0..k, by nested central differences along f.
 *
 * With `augment`, the point is (x, θ_u) and θ_u has zero dynamics. Orders above
 * n_states + n_params − 1 are rejected: a rank test never needs more.
 */
[[nodiscard]] LieStack lie_stack(const ModelSpec& model, const Vector& point, const Vector& theta, std::size_t order,
                                 const LieOptions& opt = {});

}  // namespace epiobs
