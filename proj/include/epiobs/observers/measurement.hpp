/**
 * @file measurement.hpp
 * @brief Continuous-time measurement streams and the noise models used to corrupt them.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "epiobs/types.hpp"

namespace epiobs {

/// y(t) on [t_begin, t_end]; evaluations outside the span are clamped to it.
struct MeasurementStream {
  std::function<Vector(double t)> eval;
  double t_begin{0.0};
  double t_end{0.0};

  [[nodiscard]] Vector operator()(double t) const;
};

/// Lift uniformly sampled outputs (samples[k] taken at t0 + k·h) to a stream by cubic B-spline
/// interpolation, one spline per output channel. Needs at least 5 samples.
[[nodiscard]] MeasurementStream spline_stream(double t0, double h, const std::vector<Vector>& samples);

enum class NoiseKind {
  None,
  Uniform,   ///< additive U(−a, a)
  Gaussian,  ///< additive N(0, a²)
  Counting   ///< additive integer error uniform on {−a, …, a}
};

struct NoiseSpec {
  NoiseKind kind{NoiseKind::None};
  double amplitude{0.0};
  /// Spacing of the discrete measurements.
  double sample_step{1.0};
  /// Round each measurement to the nearest integer before adding noise (count data).
  bool round_to_integer{false};

  /// True when the measurements are the exact continuous output.
  [[nodiscard]] bool exact() const noexcept {
    return !round_to_integer && (kind == NoiseKind::None || amplitude == 0.0);
  }
};

/// Corrupt samples in place according to spec (deterministic given seed).
void apply_noise(std::vector<Vector>& samples, const NoiseSpec& spec, std::uint64_t seed);

[[nodiscard]] NoiseKind parse_noise_kind(const std::string& s);
[[nodiscard]] std::string to_string(NoiseKind k);

}  // namespace epiobs
