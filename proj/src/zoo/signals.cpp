#include "epiobs/zoo/signals.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "epiobs/error.hpp"

namespace epiobs {

PiecewiseConstantSignal::PiecewiseConstantSignal(double nominal, double rel_amplitude, double dwell, double horizon,
                                                 std::uint64_t seed)
    : dwell_(dwell) {
  if (!(dwell > 0.0) || !(horizon > 0.0) || rel_amplitude < 0.0 || rel_amplitude >= 1.0) {
    throw ValidationError("PiecewiseConstantSignal: need dwell > 0, horizon > 0, 0 <= amplitude < 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1.0 - rel_amplitude, 1.0 + rel_amplitude);
  const auto n = static_cast<std::size_t>(std::ceil(horizon / dwell)) + 1;
  levels_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) levels_.push_back(nominal * u(rng));
}

double PiecewiseConstantSignal::operator()(double t) const {
  if (t <= 0.0) return levels_.front();
  const auto k = static_cast<std::size_t>(std::floor(t / dwell_));
  return levels_[std::min(k, levels_.size() - 1)];
}

TimeSignal constant_signal(double value) {
  return [value](double) { return value; };
}

TimeSignal seasonal_signal(double mean, double amplitude, double period) {
  return [=](double t) { return mean + amplitude * std::sin(2.0 * std::numbers::pi * t / period); };
}

}  // namespace epiobs
