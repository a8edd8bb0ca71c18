/**
 * @file zoo.hpp
 * @brief Built-in compartmental models with analytic Jacobians and admissible-set metadata.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "epiobs/ode/model.hpp"
#include "epiobs/zoo/signals.hpp"

namespace epiobs {

/// ẋ = A x + Φ(t, y), y = C x.
struct LinearUpToOutput {
  Matrix A;
  Matrix C;
  std::function<Vector(double t, const Vector& y)> phi;
};

struct ZooEntry {
  std::string id;
  ModelSpec spec;
  Vector default_params;
  Vector default_x0;
  double horizon{0.0};
  std::string admissible_set;
  std::string notes;
  /// Membership test for (x, θ) in the admissible set.
  std::function<bool(const Vector& x, const Vector& theta)> admissible;
  /// Random admissible (x, θ) drawn around the defaults.
  std::function<std::pair<Vector, Vector>(std::mt19937_64&)> sample;
  /// Present for models of the form ẋ = Ax + Φ(t, y).
  std::optional<LinearUpToOutput> linear_form;
};

/// Incidence law of the SIR builders.
enum class Incidence {
  Normalized,  ///< β S I / N
  MassAction   ///< β̃ S I (first parameter is β̃ = β/N)
};

/// What the SIR output measures.
enum class SirOutput {
  Prevalence,  ///< y = k I
  RemovalRate  ///< y = γ I  (k = γ convention)
};

struct SirOptions {
  Incidence incidence{Incidence::Normalized};
  SirOutput output{SirOutput::Prevalence};
};

/// What the appended cumulative state integrates.
enum class Cumulative {
  Incidence,  ///< Ċ = k β S I / N
  Removed     ///< Ċ = k γ I
};

// Parameter layouts (θ):
//   sir_classical / sir_cumulative : (β, γ, N, k)          states (S, I) / (S, I, C)
//   sir_demography                 : (β, γ, μ, N, k)       states (S, I, R), y = k I
//   sir_fluctuating                : (ν, μ, N)             states (S, I, R), y = (I, ρ(t) I)
//   three_stage                    : (a1, a2, m1, m2, m3, k)  y = x3
//   five_class_age                 : (α, β, m1, m2)        y = x_channel
//   malaria_intrahost              : (Λ, μS, μ1..μ5, γ1..γ5, r, μM, β)
//   two_compartment                : (a12, a21)            y = x1
//   academic_unobservable          : (α)                   y = (x1² + x2²)/2

[[nodiscard]] ZooEntry sir_classical(double beta, double gamma, double N, double k = 1.0, SirOptions opt = {});
[[nodiscard]] ZooEntry sir_cumulative(double beta, double gamma, double N, double k = 1.0,
                                      Cumulative kind = Cumulative::Incidence);
[[nodiscard]] ZooEntry sir_demography(double beta, double gamma, double mu, double N, double k = 1.0);
[[nodiscard]] ZooEntry sir_fluctuating(TimeSignal beta_fn, TimeSignal rho_fn, double nu, double mu, double N);
/// Fluctuating SIR with the default seeded ±20% piecewise-constant β(t), ρ(t).
[[nodiscard]] ZooEntry sir_fluctuating_default(std::uint64_t seed, double horizon = 200.0);
[[nodiscard]] ZooEntry three_stage(double a1, double a2, double m1, double m2, double m3, TimeSignal r_bar,
                                   double k = 1.0);
[[nodiscard]] ZooEntry five_class_age(double alpha, double beta, double m1, double m2, std::size_t channel = 5);
[[nodiscard]] ZooEntry malaria_intrahost(const Vector& theta);
[[nodiscard]] Vector malaria_default_params();
[[nodiscard]] ZooEntry two_compartment(double a12, double a21);
[[nodiscard]] ZooEntry academic_unobservable(double alpha);

/// Matrices of the malaria model ẋ = A x + β S M E + Λ e1, y = C x.
struct MalariaMatrices {
  Matrix A;
  Vector E;
  Vector e1;
  Matrix C;
  double Lambda{0.0};
  /// Ā = A − E C A (satisfies C Ā = 0).
  Matrix A_bar;
};
[[nodiscard]] MalariaMatrices malaria_matrices(const Vector& theta);

/// Matrix A of the five-class model and the selector row for output channel c (1-based).
[[nodiscard]] std::pair<Matrix, Matrix> five_class_matrices(double alpha, double beta, double m1, double m2,
                                                            std::size_t channel);

/// Entry with default parameters for a CLI model id; throws UsageError on unknown ids.
[[nodiscard]] ZooEntry zoo_by_id(const std::string& id, std::uint64_t seed = 1);
[[nodiscard]] std::vector<std::string> zoo_ids();

/// Rebuild an entry with overridden parameter values (same id and layout).
[[nodiscard]] ZooEntry with_params(const ZooEntry& entry, const Vector& theta, std::uint64_t seed = 1);

}  // namespace epiobs
