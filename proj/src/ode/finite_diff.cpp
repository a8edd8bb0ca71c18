#include "epiobs/ode/finite_diff.hpp"

#include <cmath>
#include <limits>

#include "epiobs/error.hpp"

namespace epiobs {

Matrix finite_diff_jacobian(const VectorMap& map, const Vector& point, const Vector& scale,
                            const std::vector<std::string>& names) {
  const auto n = point.size();
  if (scale.size() != 0 && scale.size() != n) throw ValidationError("finite_diff_jacobian: scale length mismatch");
  static const double kCbrtEps = std::cbrt(std::numeric_limits<double>::epsilon());

  auto label = [&](Eigen::Index i) {
    const auto k = static_cast<std::size_t>(i);
    return k < names.size() ? names[k] + " (index " + std::to_string(i) + ")" : "index " + std::to_string(i);
  };

  Matrix jac;
  Vector xp = point;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = scale.size() != 0 ? scale[i] : 1.0;
    double h = kCbrtEps * std::max(std::abs(point[i]), s);
    // Make the step exactly representable so that (x+h)-(x-h) == 2h.
    volatile double tmp = point[i] + h;
    h = tmp - point[i];

    xp[i] = point[i] + h;
    const Vector fp = map(xp);
    xp[i] = point[i] - h;
    const Vector fm = map(xp);
    xp[i] = point[i];

    if (!fp.allFinite() || !fm.allFinite()) {
      throw DomainError("finite_diff_jacobian: non-finite evaluation when perturbing " + label(i));
    }
    if (i == 0) jac.resize(fp.size(), n);
    jac.col(i) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

}  // namespace epiobs
