#include "epiobs/ode/model.hpp"

#include <algorithm>
#include <cmath>

#include "epiobs/error.hpp"
#include "epiobs/ode/finite_diff.hpp"

namespace epiobs {

void ModelSpec::validate() const {
  if (n_states == 0 || n_params == 0 || n_outputs == 0) {
    throw ValidationError("model '" + id + "': dimensions must be positive");
  }
  if (!f || !h) throw ValidationError("model '" + id + "': f and h are required");
  auto check_names = [&](const std::vector<std::string>& v, std::size_t n, const char* what) {
    if (!v.empty() && v.size() != n) {
      throw ValidationError("model '" + id + "': " + what + " has wrong length");
    }
  };
  check_names(state_names, n_states, "state_names");
  check_names(param_names, n_params, "param_names");
  check_names(output_names, n_outputs, "output_names");
  if (state_scales.size() != 0 && static_cast<std::size_t>(state_scales.size()) != n_states) {
    throw ValidationError("model '" + id + "': state_scales has wrong length");
  }
  if (param_scales.size() != 0 && static_cast<std::size_t>(param_scales.size()) != n_params) {
    throw ValidationError("model '" + id + "': param_scales has wrong length");
  }
}

Vector ModelSpec::state_scale_vector() const {
  return state_scales.size() != 0 ? state_scales : Vector::Ones(static_cast<Eigen::Index>(n_states));
}

Vector ModelSpec::param_scale_vector() const {
  return param_scales.size() != 0 ? param_scales : Vector::Ones(static_cast<Eigen::Index>(n_params));
}

namespace {

Matrix fd_x(const FieldMap& g, const ModelSpec& m, double t, const Vector& x, const Vector& theta) {
  return finite_diff_jacobian([&](const Vector& xx) { return g(t, xx, theta); }, x, m.state_scale_vector(),
                              m.state_names);
}

Matrix fd_theta(const FieldMap& g, const ModelSpec& m, double t, const Vector& x, const Vector& theta) {
  return finite_diff_jacobian([&](const Vector& th) { return g(t, x, th); }, theta, m.param_scale_vector(),
                              m.param_names);
}

double rel_mismatch(const Matrix& a, const Matrix& b) {
  const double denom = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / denom;
}

}  // namespace

Matrix dfdx(const ModelSpec& m, double t, const Vector& x, const Vector& theta) {
  return m.jac_f_x ? m.jac_f_x(t, x, theta) : fd_x(m.f, m, t, x, theta);
}

Matrix dfdtheta(const ModelSpec& m, double t, const Vector& x, const Vector& theta) {
  return m.jac_f_theta ? m.jac_f_theta(t, x, theta) : fd_theta(m.f, m, t, x, theta);
}

Matrix dhdx(const ModelSpec& m, double t, const Vector& x, const Vector& theta) {
  return m.jac_h_x ? m.jac_h_x(t, x, theta) : fd_x(m.h, m, t, x, theta);
}

Matrix dhdtheta(const ModelSpec& m, double t, const Vector& x, const Vector& theta) {
  return m.jac_h_theta ? m.jac_h_theta(t, x, theta) : fd_theta(m.h, m, t, x, theta);
}

double jacobian_mismatch(const ModelSpec& m, double t, const Vector& x, const Vector& theta) {
  double worst = 0.0;
  // Relative to the largest entry of each Jacobian block, so exact zeros do not blow up the ratio.
  if (m.jac_f_x) worst = std::max(worst, rel_mismatch(m.jac_f_x(t, x, theta), fd_x(m.f, m, t, x, theta)));
  if (m.jac_f_theta) {
    worst = std::max(worst, rel_mismatch(m.jac_f_theta(t, x, theta), fd_theta(m.f, m, t, x, theta)));
  }
  if (m.jac_h_x) worst = std::max(worst, rel_mismatch(m.jac_h_x(t, x, theta), fd_x(m.h, m, t, x, theta)));
  if (m.jac_h_theta) {
    worst = std::max(worst, rel_mismatch(m.jac_h_theta(t, x, theta), fd_theta(m.h, m, t, x, theta)));
  }
  return worst;
}

std::vector<double> uniform_grid(double t0, double t1, std::size_t n_intervals) {
  if (n_intervals == 0 || !(t1 > t0)) throw ValidationError("uniform_grid: need t1 > t0 and n_intervals > 0");
  std::vector<double> g(n_intervals + 1);
  const double dt = (t1 - t0) / static_cast<double>(n_intervals);
  for (std::size_t i = 0; i <= n_intervals; ++i) g[i] = t0 + dt * static_cast<double>(i);
  g.back() = t1;
  return g;
}

}  // namespace epiobs
