/**
 * @file signals.hpp
 * @brief Deterministic time signals used as fluctuating model rates.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace epiobs {

using TimeSignal = std::function<double(double)>;

/**
 * @brief Seeded piecewise-constant process.
 *
 * On each interval [k·dwell, (k+1)·dwell) the value is drawn uniformly from
 * nominal·[1 − rel_amplitude, 1 + rel_amplitude]. Values beyond the generated
 * horizon repeat the last level.
 */
class PiecewiseConstantSignal {
 public:
  PiecewiseConstantSignal(double nominal, double rel_amplitude, double dwell, double horizon, std::uint64_t seed);

  [[nodiscard]] double operator()(double t) const;
  [[nodiscard]] const std::vector<double>& levels() const noexcept { return levels_; }
  [[nodiscard]] double dwell() const noexcept { return dwell_; }

 private:
  double dwell_;
  std::vector<double> levels_;
};

[[nodiscard]] TimeSignal constant_signal(double value);

/// 1 + amplitude·sin(2πt/period): default seasonal modulation of reproduction.
[[nodiscard]] TimeSignal seasonal_signal(double mean, double amplitude, double period);

}  // namespace epiobs
