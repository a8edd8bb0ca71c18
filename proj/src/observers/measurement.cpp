#include "epiobs/observers/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "epiobs/error.hpp"

namespace epiobs {

Vector MeasurementStream::operator()(double t) const { return eval(std::clamp(t, t_begin, t_end)); }

MeasurementStream spline_stream(double t0, double h, const std::vector<Vector>& samples) {
  if (samples.size() < 5) throw ValidationError("spline_stream: need at least 5 samples");
  if (!(h > 0.0)) throw ValidationError("spline_stream: sample step must be positive");
  const auto m = samples.front().size();
  using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;
  std::vector<std::shared_ptr<const Spline>> splines;
  for (Eigen::Index c = 0; c < m; ++c) {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) {
      if (s.size() != m || !std::isfinite(s[c])) throw ValidationError("spline_stream: ragged or non-finite samples");
      v.push_back(s[c]);
    }
    splines.push_back(std::make_shared<const Spline>(v.begin(), v.end(), t0, h));
  }
  MeasurementStream out;
  out.t_begin = t0;
  out.t_end = t0 + h * static_cast<double>(samples.size() - 1);
  out.eval = [splines](double t) {
    Vector y(static_cast<Eigen::Index>(splines.size()));
    for (std::size_t c = 0; c < splines.size(); ++c) y[static_cast<Eigen::Index>(c)] = (*splines[c])(t);
    return y;
  };
  return out;
}

void apply_noise(std::vector<Vector>& samples, const NoiseSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-spec.amplitude, spec.amplitude);
  std::normal_distribution<double> gauss(0.0, spec.amplitude);
  const auto a = static_cast<long long>(std::llround(spec.amplitude));
  std::uniform_int_distribution<long long> count(-a, a);
  for (auto& s : samples) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (spec.round_to_integer) s[i] = std::round(s[i]);
      if (spec.amplitude == 0.0) continue;
      switch (spec.kind) {
        case NoiseKind::None: break;
        case NoiseKind::Uniform: s[i] += uni(rng); break;
        case NoiseKind::Gaussian: s[i] += gauss(rng); break;
        case NoiseKind::Counting: s[i] += static_cast<double>(count(rng)); break;
      }
    }
  }
}

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "none") return NoiseKind::None;
  if (s == "uniform") return NoiseKind::Uniform;
  if (s == "gaussian") return NoiseKind::Gaussian;
  if (s == "counting") return NoiseKind::Counting;
  throw UsageError("unknown noise kind '" + s + "' (expected none|uniform|gaussian|counting)");
}

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::None: return "none";
    case NoiseKind::Uniform: return "uniform";
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Counting: return "counting";
  }
  return "none";
}

}  // namespace epiobs
