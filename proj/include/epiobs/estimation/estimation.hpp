/**
 * @file estimation.hpp
 * @brief Forward sensitivities, Fisher information, least-squares fitting and t-based intervals.
 */
#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "epiobs/ode/integrator.hpp"
#include "epiobs/ode/model.hpp"

namespace epiobs {

/// State, ∂x/∂θ (n×p) and ∂x/∂x0 (n×n) along a grid.
struct SensitivityBundle {
  std::vector<double> t;
  std::vector<Vector> x;
  std::vector<Matrix> z;
  std::vector<Matrix> w;
};

[[nodiscard]] inline IntegratorOptions sensitivity_integrator() { return {1e-10, 1e-12}; }

/**
 * @brief Integrate ẋ = f, ż = A z + B, ẇ = A w jointly (A = ∂f/∂x, B = ∂f/∂θ).
 *
 * z(t0) = 0, w(t0) = Id.
 */
[[nodiscard]] SensitivityBundle sensitivity_solve(const ModelSpec& model, const Vector& theta, const Vector& x0,
                                                  const std::vector<double>& grid,
                                                  const IntegratorOptions& opt = sensitivity_integrator());

/// Which parameters and initial states are estimated (indices into θ and x0).
struct ParameterSelection {
  std::vector<std::size_t> params;
  std::vector<std::size_t> states;
  [[nodiscard]] std::size_t size() const noexcept { return params.size() + states.size(); }
};

/// All parameters free, x0 known.
[[nodiscard]] ParameterSelection all_params(const ModelSpec& model);

/**
 * @brief χ(t_i) = ∂h/∂x·[z w] + [∂h/∂θ 0] restricted to the selected columns.
 *
 * Rows are the model outputs listed in `outputs` (all outputs when empty).
 */
[[nodiscard]] std::vector<Matrix> output_sensitivity(const SensitivityBundle& bundle, const ModelSpec& model,
                                                     const Vector& theta, const ParameterSelection& sel,
                                                     const std::vector<std::size_t>& outputs = {});

/// Stacked χ samples (rows = samples × outputs).
[[nodiscard]] Matrix stack_rows(const std::vector<Matrix>& chi);

enum class DofConvention {
  KnownX0,     ///< σ̂² = SSE / (M − q)
  EstimatedX0  ///< σ̂² = SSE / (M − (n + q))
};

[[nodiscard]] std::string to_string(DofConvention c);
[[nodiscard]] DofConvention parse_dof_convention(const std::string& s);

struct Dataset {
  std::string id;
  std::vector<double> t;
  Matrix y;                          ///< M × k observations
  std::vector<std::size_t> outputs;  ///< model output index of each column
  DofConvention dof_convention{DofConvention::KnownX0};

  [[nodiscard]] std::size_t size() const noexcept { return t.size(); }
  /// Throws ValidationError on decreasing times, non-finite values or ragged shapes.
  void validate() const;
};

/// Single-output dataset.
[[nodiscard]] Dataset make_dataset(std::string id, std::vector<double> t, const std::vector<double>& y,
                                   std::size_t output_index = 0, DofConvention dof = DofConvention::KnownX0);

/// M − q (known x0) or M − (n + q) (estimated x0); q = number of estimated quantities.
[[nodiscard]] double residual_dof(const Dataset& data, std::size_t n_states, std::size_t n_estimated);

struct FitProblem {
  ModelSpec model;
  Vector theta;  ///< full parameter vector; unselected entries are held fixed
  Vector x0;     ///< full initial state; unselected entries are held fixed
  ParameterSelection free;
  /// Bounds on the selected quantities (params first, then states). Empty = [0, ∞).
  Vector lower;
  Vector upper;
};

struct FitOptions {
  std::size_t max_iterations{400};
  double damping{1e-3};
  double damping_up{10.0};
  double damping_down{0.1};
  double gtol{1e-8};  ///< max cosine between residual and Jacobian columns
  double xtol{1e-10};
  double ftol{1e-12};  ///< relative SSE decrease, 3 accepted steps in a row
  bool log_positive{true};
  IntegratorOptions integrator{sensitivity_integrator()};
};

struct FitResult {
  Vector theta_hat;
  Vector x0_hat;
  Vector estimate;  ///< selected quantities, params first then states
  std::vector<std::string> names;
  double sse{0.0};
  double sigma2_hat{0.0};
  double dof{0.0};
  std::size_t iterations{0};
  bool converged{false};
  std::string stop_reason;
  Vector residuals;
};

/// Residual vector Y − y(Θ) for a dataset (stacked sample-major).
[[nodiscard]] Vector fit_residuals(const ModelSpec& model, const Vector& theta, const Vector& x0, const Dataset& data,
                                   const IntegratorOptions& opt = sensitivity_integrator());

/// Levenberg-Marquardt ordinary least squares.
[[nodiscard]] FitResult ols_fit(const FitProblem& problem, const Dataset& data, const FitOptions& opt = {});

/// Two-sided Student-t quantile: P(T ≤ q) = level with `dof` degrees of freedom.
[[nodiscard]] double t_quantile(double dof, double level = 0.975);

/// Regularized incomplete beta I_x(a, b).
[[nodiscard]] double incomplete_beta(double a, double b, double x);

/// Student-t cumulative distribution.
[[nodiscard]] double t_cdf(double t, double dof);

struct FimReport {
  Matrix fim;
  Matrix covariance;
  Vector standard_errors;
  double condition_number{0.0};
  double t_quantile{std::numeric_limits<double>::quiet_NaN()};
  Vector half_widths;
  std::vector<std::pair<double, double>> intervals;
  bool ill_conditioned{false};
  /// Covariance came from a truncated pseudo-inverse.
  bool pseudo_inverse{false};
  double sigma2{0.0};
  double dof{0.0};
  Vector estimate;
  std::vector<std::string> names;
};

/// FIM = (1/σ²) Σ χᵀχ with condition number and (pseudo-)inverse covariance.
[[nodiscard]] FimReport fim(const std::vector<Matrix>& chi, double sigma2);

/// Half-widths t·SE and intervals around the fitted estimate.
/// @throws Error when the covariance has a negative diagonal entry.
[[nodiscard]] FimReport confidence_intervals(const FitResult& fit, FimReport report, double level = 0.975);

/// Sensitivities at the fitted point → FIM with σ̂² → confidence intervals.
[[nodiscard]] FimReport fim_at_fit(const FitProblem& problem, const Dataset& data, const FitResult& fit,
                                   double level = 0.975);

}  // namespace epiobs
