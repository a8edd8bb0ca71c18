/**
 * @file model.hpp
 * @brief ODE model description: vector field, observation map and optional analytic Jacobians.
 */
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "epiobs/types.hpp"

namespace epiobs {

/// (t, x, θ) ↦ vector. Used for both the vector field f and the observation map h.
using FieldMap = std::function<Vector(double t, const Vector& x, const Vector& theta)>;
/// (t, x, θ) ↦ matrix of partial derivatives.
using JacobianMap = std::function<Matrix(double t, const Vector& x, const Vector& theta)>;

/**
 * @brief ẋ = f(t, x, θ), y = h(t, x, θ).
 *
 * Jacobian members may be left empty; the free functions below then fall back to
 * central finite differences with the declared characteristic scales.
 */
struct ModelSpec {
  std::string id;
  std::size_t n_states{0};
  std::size_t n_params{0};
  std::size_t n_outputs{0};

  FieldMap f;
  FieldMap h;
  JacobianMap jac_f_x;
  JacobianMap jac_f_theta;
  JacobianMap jac_h_x;
  JacobianMap jac_h_theta;

  std::vector<std::string> state_names;
  std::vector<std::string> param_names;
  std::vector<std::string> output_names;

  /// Characteristic magnitudes used as the floor of finite-difference steps (empty = 1).
  Vector state_scales;
  Vector param_scales;

  /// Throws ValidationError on inconsistent dimensions or missing maps.
  void validate() const;

  [[nodiscard]] bool has_analytic_jacobians() const noexcept {
    return jac_f_x && jac_f_theta && jac_h_x && jac_h_theta;
  }
  [[nodiscard]] Vector state_scale_vector() const;
  [[nodiscard]] Vector param_scale_vector() const;
};

[[nodiscard]] Matrix dfdx(const ModelSpec& m, double t, const Vector& x, const Vector& theta);
[[nodiscard]] Matrix dfdtheta(const ModelSpec& m, double t, const Vector& x, const Vector& theta);
[[nodiscard]] Matrix dhdx(const ModelSpec& m, double t, const Vector& x, const Vector& theta);
[[nodiscard]] Matrix dhdtheta(const ModelSpec& m, double t, const Vector& x, const Vector& theta);

/// Largest relative discrepancy between analytic and finite-difference Jacobians at a point.
/// Returns 0 when the model has no analytic Jacobians.
[[nodiscard]] double jacobian_mismatch(const ModelSpec& m, double t, const Vector& x, const Vector& theta);

/// Time grid plus state and output samples.
struct Trajectory {
  std::vector<double> t;
  std::vector<Vector> x;
  std::vector<Vector> y;

  [[nodiscard]] std::size_t size() const noexcept { return t.size(); }
};

/// Equally spaced grid with n_intervals+1 points from t0 to t1 inclusive.
[[nodiscard]] std::vector<double> uniform_grid(double t0, double t1, std::size_t n_intervals);

}  // namespace epiobs
