#include <cmath>

#include "epiobs/error.hpp"
#include "epiobs/estimation/estimation.hpp"

namespace epiobs {

namespace {

using Eigen::Index;

// Augmented layout: [x (n) | vec(z) (n·p, column-major) | vec(w) (n·n, column-major)].
struct Layout {
  Index n;
  Index p;
  [[nodiscard]] Index size() const { return n + n * p + n * n; }
};

}  // namespace

SensitivityBundle sensitivity_solve(const ModelSpec& model, const Vector& theta, const Vector& x0,
                                    const std::vector<double>& grid, const IntegratorOptions& opt) {
  model.validate();
  const Layout L{static_cast<Index>(model.n_states), static_cast<Index>(model.n_params)};
  if (x0.size() != L.n) throw ValidationError("sensitivity_solve: x0 has wrong dimension");
  if (theta.size() != L.p) throw ValidationError("sensitivity_solve: theta has wrong dimension");

  Vector X0 = Vector::Zero(L.size());
  X0.head(L.n) = x0;
  Eigen::Map<Matrix>(X0.data() + L.n + L.n * L.p, L.n, L.n).setIdentity();

  const OdeRhs rhs = [&](double t, const Vector& X) {
    const Vector x = X.head(L.n);
    const Matrix A = dfdx(model, t, x, theta);
    const Matrix B = dfdtheta(model, t, x, theta);
    const Eigen::Map<const Matrix> z(X.data() + L.n, L.n, L.p);
    const Eigen::Map<const Matrix> w(X.data() + L.n + L.n * L.p, L.n, L.n);
    Vector dX(L.size());
    dX.head(L.n) = model.f(t, x, theta);
    Eigen::Map<Matrix>(dX.data() + L.n, L.n, L.p) = A * z + B;
    Eigen::Map<Matrix>(dX.data() + L.n + L.n * L.p, L.n, L.n) = A * w;
    return dX;
  };

  const auto sol = solve_ode(rhs, X0, grid, opt);
  SensitivityBundle out;
  out.t = sol.t;
  out.x.reserve(sol.x.size());
  out.z.reserve(sol.x.size());
  out.w.reserve(sol.x.size());
  for (const auto& X : sol.x) {
    out.x.emplace_back(X.head(L.n));
    out.z.emplace_back(Eigen::Map<const Matrix>(X.data() + L.n, L.n, L.p));
    out.w.emplace_back(Eigen::Map<const Matrix>(X.data() + L.n + L.n * L.p, L.n, L.n));
  }
  return out;
}

ParameterSelection all_params(const ModelSpec& model) {
  ParameterSelection s;
  for (std::size_t i = 0; i < model.n_params; ++i) s.params.push_back(i);
  return s;
}

std::vector<Matrix> output_sensitivity(const SensitivityBundle& bundle, const ModelSpec& model, const Vector& theta,
                                       const ParameterSelection& sel, const std::vector<std::size_t>& outputs) {
  std::vector<std::size_t> rows = outputs;
  if (rows.empty())
    for (std::size_t i = 0; i < model.n_outputs; ++i) rows.push_back(i);
  for (auto r : rows)
    if (r >= model.n_outputs) throw ValidationError("output_sensitivity: output index out of range");
  for (auto j : sel.params)
    if (j >= model.n_params) throw ValidationError("output_sensitivity: parameter index out of range");
  for (auto j : sel.states)
    if (j >= model.n_states) throw ValidationError("output_sensitivity: state index out of range");

  const auto q = static_cast<Index>(sel.size());
  std::vector<Matrix> chi;
  chi.reserve(bundle.t.size());
  for (std::size_t i = 0; i < bundle.t.size(); ++i) {
    const double t = bundle.t[i];
    const Vector& x = bundle.x[i];
    const Matrix Hx = dhdx(model, t, x, theta);
    const Matrix Ht = dhdtheta(model, t, x, theta);
    const Matrix dz = Hx * bundle.z[i] + Ht;
    const Matrix dw = Hx * bundle.w[i];
    Matrix c(static_cast<Index>(rows.size()), q);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto ri = static_cast<Index>(r);
      const auto hr = static_cast<Index>(rows[r]);
      Index col = 0;
      for (auto j : sel.params) c(ri, col++) = dz(hr, static_cast<Index>(j));
      for (auto j : sel.states) c(ri, col++) = dw(hr, static_cast<Index>(j));
    }
    chi.push_back(std::move(c));
  }
  return chi;
}

Matrix stack_rows(const std::vector<Matrix>& chi) {
  if (chi.empty()) return {};
  Index rows = 0;
  for (const auto& c : chi) rows += c.rows();
  Matrix S(rows, chi.front().cols());
  Index r = 0;
  for (const auto& c : chi) {
    S.middleRows(r, c.rows()) = c;
    r += c.rows();
  }
  return S;
}

}  // namespace epiobs
