/**
 * @file integrator.hpp
 * @brief Adaptive Dormand-Prince 4(5) integrator with PI step-size control.
 */
#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "epiobs/ode/model.hpp"

namespace epiobs {

struct IntegratorOptions {
  double rel_tol{1e-8};
  double abs_tol{1e-10};
  double initial_step{0.0};  ///< 0 selects the step automatically
  double max_step{std::numeric_limits<double>::infinity()};
  std::size_t max_steps{2'000'000};
  /// When > 0 the integrator takes fixed steps of this size (no error control).
  double fixed_step{0.0};
};

struct IntegratorStats {
  std::size_t accepted{0};
  std::size_t rejected{0};
  std::size_t evaluations{0};
};

using OdeRhs = std::function<Vector(double t, const Vector& x)>;

struct OdeSolution {
  std::vector<double> t;
  std::vector<Vector> x;
  IntegratorStats stats;
};

/**
 * @brief Integrate ẋ = rhs(t, x) from grid.front() and sample at every grid point.
 *
 * Internal steps are clipped so that grid points are hit exactly; the sample at
 * grid.front() is x0 itself.
 * @throws ValidationError on an empty or non-increasing grid or non-finite x0.
 * @throws DomainError when the derivative at an accepted state is non-finite.
 * @throws IntegrationError on step-size underflow or an exhausted step budget.
 */
[[nodiscard]] OdeSolution solve_ode(const OdeRhs& rhs, const Vector& x0, const std::vector<double>& grid,
                                    const IntegratorOptions& opt = {});

/// Integrate a model and recompute y = h(t, x, θ) at every sample.
[[nodiscard]] Trajectory integrate(const ModelSpec& model, const Vector& x0, const Vector& theta,
                                   const std::vector<double>& grid, const IntegratorOptions& opt = {});

}  // namespace epiobs
