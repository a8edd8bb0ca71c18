/**
 * @file rank.hpp
 * @brief Observability and identifiability rank tests.
 */
#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "epiobs/ode/lie_stack.hpp"
#include "epiobs/ode/model.hpp"
#include "epiobs/zoo/zoo.hpp"

namespace epiobs {

struct RankOptions {
  /// σ_i counts iff σ_i > max(rows, cols)·σ_max·rel_tol (and above the noise floor).
  double rel_tol{1e-10};
  /// Multiplier on the finite-difference error estimate of the matrix (Lie stacks only).
  double noise_factor{10.0};
  /// Scale columns by characteristic magnitudes before the SVD (Lie stacks only).
  bool scale_columns{true};
};

struct RankReport {
  Vector point;
  std::size_t stack_order{0};
  Vector singular_values;  ///< descending
  std::size_t numerical_rank{0};
  bool full_rank{false};
  double condition_number{0.0};  ///< σ_max/σ_min, +inf when rank-deficient
  /// Orthonormal basis of the numerical null space (columns), in analyzed coordinates.
  Matrix null_directions;
  double tolerance{0.0};
  /// Determinant of the unscaled matrix when it is square.
  std::optional<double> determinant;
  /// Finite-difference noise made the verdict less trustworthy.
  bool degraded{false};
  /// Matrix whose SVD was analyzed (column-scaled Jacobian for Lie stacks).
  Matrix analyzed;
  /// Column scale factors applied (ones when unscaled).
  Vector column_scales;
};

/// SVD rank analysis of an arbitrary matrix. `noise_floor` is an absolute lower bound on the tolerance.
[[nodiscard]] RankReport analyze_rank(const Matrix& M, const RankOptions& opt = {}, double noise_floor = 0.0);

/// O = [C; CA; …; CA^{n−1}].
[[nodiscard]] Matrix observability_matrix(const Matrix& A, const Matrix& C);

[[nodiscard]] RankReport linear_observability(const Matrix& A, const Matrix& C, const RankOptions& opt = {});

struct OrcOptions {
  bool augment{false};
  std::vector<std::size_t> unknown_params;  ///< empty = all (when augmenting)
  std::optional<std::size_t> order;         ///< default: dim(point) − 1
  RankOptions rank;
  double t{0.0};
};

/// Observability rank condition at one (possibly augmented) point.
[[nodiscard]] RankReport orc_rank(const ModelSpec& model, const Vector& point, const Vector& theta,
                                  const OrcOptions& opt = {});

struct SampledRank {
  std::vector<RankReport> reports;
  bool generically_full_rank{false};
  std::size_t min_rank{0};
  std::size_t max_rank{0};
};

/// ORC at user points plus `n_random` seeded admissible samples; generic only if all pass.
[[nodiscard]] SampledRank sampled_orc(const ZooEntry& entry, const std::vector<std::pair<Vector, Vector>>& user_points,
                                      const OrcOptions& opt = {}, std::size_t n_random = 20, std::uint64_t seed = 1);

struct ProbeResult {
  double gap{0.0};     ///< sup over the grid of ‖y_a − y_b‖∞
  double y_norm{0.0};  ///< sup over the grid of ‖y_a‖∞
};

[[nodiscard]] ProbeResult indistinguishability_probe(const ModelSpec& model, const Vector& point_a,
                                                     const Vector& point_b, const Vector& theta_a,
                                                     const Vector& theta_b, const std::vector<double>& grid);

enum class Detectability { Detectable, Marginal, NotDetectable };

struct DetectabilityReport {
  Detectability verdict{Detectability::Detectable};
  std::size_t unobservable_dim{0};
  /// Eigenvalues of A restricted to the unobservable subspace.
  std::vector<std::complex<double>> unobservable_eigenvalues;
  /// Some unobservable eigenvalue has (numerically) zero real part.
  bool zero_eigenvalue{false};
};

[[nodiscard]] DetectabilityReport detectability_linear(const Matrix& A, const Matrix& C,
                                                       const RankOptions& opt = {});

[[nodiscard]] const char* to_string(Detectability d) noexcept;

}  // namespace epiobs
