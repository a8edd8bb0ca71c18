/**
 * @file gains.hpp
 * @brief Observer gain synthesis: pole placement, Vandermonde inverses and high-gain spectra.
 */
#pragma once

#include <complex>
#include <string>
#include <vector>

#include "epiobs/types.hpp"

namespace epiobs {

/// Eigenvalue set; complex entries must come in conjugate pairs.
using Spectrum = std::vector<std::complex<double>>;

[[nodiscard]] Spectrum real_spectrum(const Vector& lambda);

/// Elementary symmetric functions (σ_1, …, σ_n) of a real set.
[[nodiscard]] Vector symmetric_functions(const Vector& lambda);

/// Elementary symmetric functions of a conjugate-closed set (real by construction).
/// @throws ValidationError when the set is not closed under conjugation.
[[nodiscard]] Vector symmetric_functions(const Spectrum& lambda);

/// Monic polynomial ∏(ξ − λ_i) as ascending coefficients c_0 … c_n (c_n = 1).
[[nodiscard]] Vector characteristic_coefficients(const Spectrum& lambda);

/**
 * @brief Gain of the Brunovsky pair with characteristic polynomial ξⁿ + a_1 ξⁿ⁻¹ + … + a_n.
 *
 * ḡ_i = a_{n+1−i} + (−1)^{n−i} σ_{n+1−i}(Λ), so that Sp(Ā + ḡ C̄) = Λ.
 * @param a (a_1, …, a_n).
 */
[[nodiscard]] Vector brunovsky_gain(const Vector& a, const Spectrum& lambda);

/// Companion matrix of the Brunovsky form: ones on the subdiagonal, last column −(a_n, …, a_1).
[[nodiscard]] Matrix brunovsky_matrix(const Vector& a);

struct GainVector {
  Vector g;
  Spectrum assigned_spectrum;
  Spectrum achieved_spectrum;
  /// Change of basis P = [L, AL, …, Aⁿ⁻¹L] with L = O⁻¹ e_n.
  Matrix transform_P;
  /// Characteristic coefficients (a_1, …, a_n) of A.
  Vector char_coeffs;
  double observability_condition{0.0};
  /// Largest |assigned − achieved| eigenvalue distance.
  double spectrum_error{0.0};
  std::string warning;
};

/**
 * @brief Gain G such that Sp(A + G C) = Λ for a single-output observable pair.
 *
 * The achieved spectrum is checked against Λ before returning.
 * @throws NotObservableError when O is rank deficient.
 * @throws ValidationError on dimension mismatch or a set not closed under conjugation.
 */
[[nodiscard]] GainVector pole_place_gain(const Matrix& A, const Matrix& C, const Spectrum& lambda);
[[nodiscard]] GainVector pole_place_gain(const Matrix& A, const Matrix& C, const Vector& lambda);

/// Row-ordered Vandermonde matrix: row i is (λ_iⁿ⁻¹, …, λ_i, 1).
[[nodiscard]] Matrix vandermonde(const Vector& lambda);

/// Closed-form inverse of vandermonde(λ).
/// @throws SingularityError when two λ coincide.
[[nodiscard]] Matrix vandermonde_inverse(const Vector& lambda);

/// λ_1 + √n·L·‖V_Λ⁻¹‖∞: the exponential rate bound of a high-gain observer.
[[nodiscard]] double high_gain_rate_bound(const Vector& lambda, double lipschitz_L);

/**
 * @brief Distinct negative spectrum λ_i = −θ·αⁱ (i = 1…n) meeting the high-gain rate bound.
 *
 * Returns λ_1 > … > λ_n with high_gain_rate_bound(Λ, L) ≤ −θ, for the smallest α found
 * by doubling from 1.1 and bisection.
 */
[[nodiscard]] Vector high_gain_spectrum(std::size_t n, double lipschitz_L, double theta_rate);

/// Shift pair (A, C) of the observability canonical form: ones on the superdiagonal, C = e_1ᵀ.
[[nodiscard]] std::pair<Matrix, Matrix> canonical_pair(std::size_t n);

}  // namespace epiobs
