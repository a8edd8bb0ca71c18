/**
 * @file observers.hpp
 * @brief Runnable state observers and the simulation harness used for noise experiments.
 *
 * Every run integrates the true system and the observer as one coupled ODE. The observer
 * reads either the exact output h(t, x) of the truth or an external measurement stream.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "epiobs/observers/gains.hpp"
#include "epiobs/observers/measurement.hpp"
#include "epiobs/ode/integrator.hpp"
#include "epiobs/zoo/zoo.hpp"

namespace epiobs {

enum class ObserverFamily {
  Luenberger,           ///< x̂' = A x̂ + Φ(t, y) + G (C x̂ − y)
  ChangeOfCoordinates,  ///< malaria: ŵ' = (Ā − LC) ŵ + (L + (Ā − LC) E) y + Λ e1, x̂ = ŵ + E y
  ReducedOrder,         ///< fluctuating SIR: Z' = νN − y2 − μZ
  HighGain              ///< SIR in observability canonical form with saturated nonlinearity
};

[[nodiscard]] std::string to_string(ObserverFamily f);
/// Accepts the canonical names and the short aliases luenberger, malaria, high-gain-sir.
[[nodiscard]] ObserverFamily parse_family(const std::string& s);

/// Observer internal dynamics ξ' = rhs(t, ξ, y) with the maps that turn ξ into an estimate.
struct ObserverDynamics {
  ObserverFamily family{ObserverFamily::Luenberger};
  std::size_t dim{0};
  std::function<Vector(double t, const Vector& xi, const Vector& y)> rhs;
  /// State estimate in report coordinates.
  std::function<Vector(double t, const Vector& xi, const Vector& y)> estimate;
  /// h(x̂) − y for innovation-driven families; empty otherwise.
  std::function<Vector(double t, const Vector& xi, const Vector& y)> innovation;
  /// Observer state for an initial estimate given in report coordinates.
  std::function<Vector(const Vector& xhat, const Vector& y)> lift;
  /// Truth state in report coordinates (identity when empty).
  std::function<Vector(const Vector& x)> report_truth;
  /// Marks samples where the estimate relies on a safeguard (e.g. saturation).
  std::function<bool(const Vector& xi)> flag;
  std::string flag_message;
  std::vector<std::string> report_names;
  /// Expected exponential rate of the estimation error (max real part of the error spectrum,
  /// or the guaranteed bound for the high-gain family).
  double predicted_rate{0.0};
};

[[nodiscard]] ObserverDynamics luenberger_dynamics(const ZooEntry& entry, const GainVector& G);
[[nodiscard]] ObserverDynamics malaria_dynamics(const ZooEntry& entry, const Vector& L);
[[nodiscard]] ObserverDynamics reduced_order_dynamics(const ZooEntry& entry);
[[nodiscard]] ObserverDynamics high_gain_sir_dynamics(const ZooEntry& entry, const Vector& lambda);

/// Lipschitz bound of the saturated canonical-form nonlinearity on the admissible box.
[[nodiscard]] double high_gain_sir_lipschitz(double beta, double rho, double N, double k = 1.0);
/// Canonical coordinates (y, kρI, (βS/N − ρ) kρI) of an (S, I, C) state.
[[nodiscard]] Vector high_gain_sir_coordinates(const Vector& x, const Vector& theta);

struct ObserverRun {
  ObserverFamily family{ObserverFamily::Luenberger};
  std::vector<double> t;
  std::vector<Vector> x_true;
  std::vector<Vector> x_hat;
  std::vector<Vector> innovation;  ///< empty for families without an innovation
  std::vector<double> error_norm;
  std::vector<std::string> state_names;
  double empirical_decay_rate{std::numeric_limits<double>::quiet_NaN()};
  double predicted_rate{0.0};
  /// Number of samples where the dynamics' safeguard flag was raised.
  std::size_t flagged_samples{0};
  std::vector<std::string> warnings;

  /// RMS of error_norm over the final 10% of the run.
  [[nodiscard]] double tail_error() const;
  /// RMS of error_norm over the second half of the run.
  [[nodiscard]] double steady_state_error() const;
  /// First time after which error_norm stays ≤ fraction·error_norm(t0) (NaN if never).
  [[nodiscard]] double time_to_fraction(double fraction) const;
};

/// Least-squares slope of log e over [t0 + 0.3T, t0 + 0.9T], skipping e < 1e3·eps.
[[nodiscard]] double empirical_decay_rate(const std::vector<double>& t, const std::vector<double>& e);

struct RunSetup {
  Vector x0;  ///< true initial state
  std::vector<double> grid;
  IntegratorOptions integrator{1e-10, 1e-12};
  /// When empty the observer reads the exact output of the truth.
  std::optional<MeasurementStream> stream;
};

/// Integrate truth and observer jointly and collect the run.
[[nodiscard]] ObserverRun run_observer(const ZooEntry& entry, const ObserverDynamics& dyn, const Vector& xi0,
                                       const RunSetup& setup);

[[nodiscard]] ObserverRun run_luenberger(const ZooEntry& entry, const GainVector& G, const Vector& xhat0,
                                         const RunSetup& setup);
[[nodiscard]] ObserverRun run_malaria_observer(const ZooEntry& entry, const Vector& L, const Vector& w0,
                                               const RunSetup& setup);
[[nodiscard]] ObserverRun run_reduced_order(const ZooEntry& entry, double Z0, const RunSetup& setup);
[[nodiscard]] ObserverRun run_high_gain_sir(const ZooEntry& entry, const Vector& lambda, const Vector& z0,
                                            const RunSetup& setup);

struct ObserverConfig {
  ObserverFamily family{ObserverFamily::Luenberger};
  ZooEntry entry;
  /// Assigned spectrum (Luenberger, high-gain).
  Vector spectrum;
  /// Output-injection gain (change-of-coordinates family).
  Vector gain;
  Vector x0;
  /// Initial estimate in report coordinates.
  Vector xhat0;
  double horizon{0.0};
  double report_step{0.1};
  IntegratorOptions integrator{1e-10, 1e-12};
};

/// Scenario used by the CLI and the acceptance suite for each family.
[[nodiscard]] ObserverConfig default_observer_config(ObserverFamily family, std::uint64_t seed = 1);

[[nodiscard]] ObserverDynamics make_dynamics(const ObserverConfig& config);

/**
 * @brief Simulate the truth, sample and corrupt its output, lift it to a stream and run the observer.
 *
 * Exact measurements (no rounding, zero amplitude) take the coupled path, so the result is the
 * noiseless run.
 */
[[nodiscard]] ObserverRun simulate_with_noise(const ObserverConfig& config, const NoiseSpec& noise,
                                              std::uint64_t seed);

}  // namespace epiobs
