#include "epiobs/ode/lie_stack.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "epiobs/error.hpp"

namespace epiobs {
namespace {

// Sixth-order central first-derivative stencil: f'(0) ≈ Σ c_j (f(j s) − f(−j s)) / s.
constexpr std::array<double, 3> kStencil{3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};

// Ratio of the two step sizes used to estimate finite-difference error.
constexpr double kAltStep = 0.6;

class LieEvaluator {
 public:
  LieEvaluator(const ModelSpec& m, const Vector& theta, const LieOptions& opt, std::vector<std::size_t> unknown)
      : m_(m), theta_(theta), opt_(opt), unknown_(std::move(unknown)) {}

  [[nodiscard]] Vector field(const Vector& z) const {
    const auto n = static_cast<Eigen::Index>(m_.n_states);
    Vector dz = Vector::Zero(z.size());
    dz.head(n) = m_.f(opt_.t, z.head(n), params(z));
    return dz;
  }

  [[nodiscard]] Vector output(const Vector& z) const {
    return m_.h(opt_.t, z.head(static_cast<Eigen::Index>(m_.n_states)), params(z));
  }

  /// L_f^level h at z, derivative step s along the field (held fixed for all nested points).
  [[nodiscard]] Vector lie(std::size_t level, const Vector& z, double s) const {
    if (level == 0) {
      Vector y = output(z);
      if (!y.allFinite()) throw DomainError("lie_stack: non-finite output during nested differencing");
      return y;
    }
    const Vector v = field(z);
    if (!v.allFinite()) throw DomainError("lie_stack: non-finite vector field during nested differencing");
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(m_.n_outputs));
    if (v.isZero(0.0)) return acc;
    for (std::size_t j = 0; j < kStencil.size(); ++j) {
      const double d = static_cast<double>(j + 1) * s;
      acc += kStencil[j] * (lie(level - 1, z + d * v, s) - lie(level - 1, z - d * v, s));
    }
    return acc / s;
  }

  [[nodiscard]] Vector stack(std::size_t order, const Vector& z, double s) const {
    const auto m = static_cast<Eigen::Index>(m_.n_outputs);
    Vector out(m * static_cast<Eigen::Index>(order + 1));
    for (std::size_t i = 0; i <= order; ++i) out.segment(static_cast<Eigen::Index>(i) * m, m) = lie(i, z, s);
    return out;
  }

  /// Jacobian of the stack using per-coordinate steps eta·scale_c and field step s.
  [[nodiscard]] Matrix jacobian(std::size_t order, const Vector& z, const Vector& scales, double eta,
                                double s) const {
    const auto rows = static_cast<Eigen::Index>(m_.n_outputs * (order + 1));
    Matrix jac(rows, z.size());
    Vector zp = z;
    for (Eigen::Index c = 0; c < z.size(); ++c) {
      volatile double tmp = z[c] + eta * scales[c];
      const double hc = tmp - z[c];
      Vector col = Vector::Zero(rows);
      for (std::size_t j = 0; j < kStencil.size(); ++j) {
        const double d = static_cast<double>(j + 1) * hc;
        zp[c] = z[c] + d;
        const Vector sp = stack(order, zp, s);
        zp[c] = z[c] - d;
        const Vector sm = stack(order, zp, s);
        col += kStencil[j] * (sp - sm);
      }
      zp[c] = z[c];
      jac.col(c) = col / hc;
    }
    return jac;
  }

 private:
  [[nodiscard]] Vector params(const Vector& z) const {
    if (unknown_.empty()) return theta_;
    Vector th = theta_;
    const auto n = static_cast<Eigen::Index>(m_.n_states);
    for (std::size_t k = 0; k < unknown_.size(); ++k) {
      th[static_cast<Eigen::Index>(unknown_[k])] = z[n + static_cast<Eigen::Index>(k)];
    }
    return th;
  }

  const ModelSpec& m_;
  const Vector& theta_;
  const LieOptions& opt_;
  std::vector<std::size_t> unknown_;
};

}  // namespace

LieStack lie_stack(const ModelSpec& model, const Vector& point, const Vector& theta, std::size_t order,
                   const LieOptions& opt) {
  model.validate();
  if (static_cast<std::size_t>(theta.size()) != model.n_params) {
    throw ValidationError("lie_stack: theta has wrong length");
  }
  std::vector<std::size_t> unknown;
  if (opt.augment) {
    if (opt.unknown_params.empty()) {
      for (std::size_t k = 0; k < model.n_params; ++k) unknown.push_back(k);
    } else {
      unknown = opt.unknown_params;
      for (auto k : unknown) {
        if (k >= model.n_params) throw ValidationError("lie_stack: unknown parameter index out of range");
      }
    }
  }
  const std::size_t dim = model.n_states + unknown.size();
  if (static_cast<std::size_t>(point.size()) != dim) throw ValidationError("lie_stack: point has wrong length");
  if (!point.allFinite()) throw ValidationError("lie_stack: non-finite point");
  const std::size_t cap = model.n_states + model.n_params - 1;
  if (order > cap) {
    throw ValidationError("lie_stack: order " + std::to_string(order) + " exceeds cap " + std::to_string(cap));
  }

  Vector declared(static_cast<Eigen::Index>(dim));
  declared.head(static_cast<Eigen::Index>(model.n_states)) = model.state_scale_vector();
  const Vector ps = model.param_scale_vector();
  for (std::size_t k = 0; k < unknown.size(); ++k) {
    declared[static_cast<Eigen::Index>(model.n_states + k)] = ps[static_cast<Eigen::Index>(unknown[k])];
  }
  Vector scales = point.cwiseAbs().cwiseMax(declared);

  LieEvaluator ev(model, theta, opt, unknown);

  // Depth of nested differencing for the Jacobian is order+1; balance truncation
  // (∝ step^6) against round-off (∝ eps/step^depth).
  const double depth = static_cast<double>(order + 1);
  const double eta = std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (depth + 6.0)) * opt.step_factor;
  const Vector v0 = ev.field(point);
  if (!v0.allFinite()) throw DomainError("lie_stack: non-finite vector field at the point");
  const double speed = v0.cwiseAbs().cwiseQuotient(scales).maxCoeff();
  const double s = speed > 0.0 ? eta / speed : eta;

  LieStack out;
  out.point = point;
  out.order = order;
  out.n_outputs = model.n_outputs;
  out.point_scales = scales;
  out.values = ev.stack(order, point, s);
  out.jacobian = ev.jacobian(order, point, scales, eta, s);

  const Vector values_alt = ev.stack(order, point, s * kAltStep);
  const Matrix jac_alt = ev.jacobian(order, point, scales, eta * kAltStep, s * kAltStep);
  out.jacobian_error = out.jacobian - jac_alt;

  // Flag rows whose two estimates disagree in the leading digit.
  const auto m = static_cast<Eigen::Index>(model.n_outputs);
  const double vscale = out.values.head(m).cwiseAbs().maxCoeff();
  for (Eigen::Index r = 0; r < out.values.size(); ++r) {
    const double dv = std::abs(out.values[r] - values_alt[r]);
    const double mag = std::max(std::abs(out.values[r]), 1e-12 * vscale);
    if (dv > 0.1 * mag && dv > 1e-300) out.noise_warning = true;
    const double jn = out.jacobian.row(r).cwiseProduct(scales.transpose()).norm();
    const double je = out.jacobian_error.row(r).cwiseProduct(scales.transpose()).norm();
    if (jn > 0.0 && je > 0.1 * jn) out.noise_warning = true;
  }
  return out;
}

}  // namespace epiobs
