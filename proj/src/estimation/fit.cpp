#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "epiobs/error.hpp"
#include "epiobs/estimation/estimation.hpp"

namespace epiobs {

namespace {

using Eigen::Index;

// Strictly increasing grid plus the grid index of every observation (handles repeated times).
struct SampleGrid {
  std::vector<double> grid;
  std::vector<std::size_t> index;
};

SampleGrid sample_grid(const std::vector<double>& t) {
  SampleGrid g;
  for (double ti : t) {
    if (g.grid.empty() || ti > g.grid.back()) g.grid.push_back(ti);
    g.index.push_back(g.grid.size() - 1);
  }
  if (g.grid.size() == 1) g.grid.push_back(g.grid.front() + 1.0);  // solver needs an interval
  return g;
}

struct Evaluation {
  Vector r;  // Y − y
  Matrix J;  // ∂y/∂(selected quantities), stacked like r
  double sse{0.0};
};

Evaluation evaluate(const ModelSpec& model, const Vector& theta, const Vector& x0, const ParameterSelection& sel,
                    const Dataset& data, const SampleGrid& g, const IntegratorOptions& opt) {
  const auto bundle = sensitivity_solve(model, theta, x0, g.grid, opt);
  const auto chi = output_sensitivity(bundle, model, theta, sel, data.outputs);
  const auto k = static_cast<Index>(data.outputs.size());
  const auto M = static_cast<Index>(data.size());
  Evaluation e;
  e.r.resize(M * k);
  e.J.resize(M * k, static_cast<Index>(sel.size()));
  for (Index i = 0; i < M; ++i) {
    const auto gi = g.index[static_cast<std::size_t>(i)];
    const Vector y = model.h(bundle.t[gi], bundle.x[gi], theta);
    for (Index c = 0; c < k; ++c) {
      e.r[i * k + c] = data.y(i, c) - y[static_cast<Index>(data.outputs[static_cast<std::size_t>(c)])];
      e.J.row(i * k + c) = chi[gi].row(c);
    }
  }
  if (!e.r.allFinite() || !e.J.allFinite()) throw DomainError("ols_fit: non-finite model output");
  e.sse = e.r.squaredNorm();
  return e;
}

double max_cosine(const Matrix& J, const Vector& r) {
  const double rn = r.norm();
  if (rn == 0.0) return 0.0;
  double m = 0.0;
  for (Index j = 0; j < J.cols(); ++j) {
    const double cn = J.col(j).norm();
    if (cn > 0.0) m = std::max(m, std::abs(J.col(j).dot(r)) / (cn * rn));
  }
  return m;
}

}  // namespace

std::string to_string(DofConvention c) {
  return c == DofConvention::KnownX0 ? "known-x0" : "estimated-x0";
}

DofConvention parse_dof_convention(const std::string& s) {
  if (s == "known-x0") return DofConvention::KnownX0;
  if (s == "estimated-x0") return DofConvention::EstimatedX0;
  throw UsageError("unknown dof convention '" + s + "' (expected known-x0|estimated-x0)");
}

void Dataset::validate() const {
  if (t.empty()) throw ValidationError("dataset '" + id + "': no observations");
  if (static_cast<std::size_t>(y.rows()) != t.size())
    throw ValidationError("dataset '" + id + "': time and value counts differ");
  if (outputs.empty() || static_cast<std::size_t>(y.cols()) != outputs.size())
    throw ValidationError("dataset '" + id + "': output columns and output indices differ");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) throw ValidationError("dataset '" + id + "': non-finite time");
    if (i > 0 && t[i] < t[i - 1]) throw ValidationError("dataset '" + id + "': times must be nondecreasing");
  }
  if (!y.allFinite()) throw ValidationError("dataset '" + id + "': non-finite value");
}

Dataset make_dataset(std::string id, std::vector<double> t, const std::vector<double>& y, std::size_t output_index,
                     DofConvention dof) {
  Dataset d;
  d.id = std::move(id);
  d.t = std::move(t);
  d.y = Eigen::Map<const Vector>(y.data(), static_cast<Index>(y.size()));
  d.outputs = {output_index};
  d.dof_convention = dof;
  d.validate();
  return d;
}

double residual_dof(const Dataset& data, std::size_t n_states, std::size_t n_estimated) {
  const auto M = static_cast<double>(data.size() * data.outputs.size());
  const auto q = static_cast<double>(n_estimated);
  return data.dof_convention == DofConvention::KnownX0 ? M - q : M - (static_cast<double>(n_states) + q);
}

Vector fit_residuals(const ModelSpec& model, const Vector& theta, const Vector& x0, const Dataset& data,
                     const IntegratorOptions& opt) {
  data.validate();
  const auto g = sample_grid(data.t);
  const auto traj = integrate(model, x0, theta, g.grid, opt);
  const auto k = static_cast<Index>(data.outputs.size());
  Vector r(static_cast<Index>(data.size()) * k);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (Index c = 0; c < k; ++c)
      r[static_cast<Index>(i) * k + c] =
          data.y(static_cast<Index>(i), c) - traj.y[g.index[i]][static_cast<Index>(data.outputs[c])];
  return r;
}

FitResult ols_fit(const FitProblem& problem, const Dataset& data, const FitOptions& opt) {
  const auto& model = problem.model;
  model.validate();
  data.validate();
  for (auto o : data.outputs)
    if (o >= model.n_outputs) throw ValidationError("ols_fit: dataset refers to a missing model output");
  const auto& sel = problem.free;
  const auto q = static_cast<Index>(sel.size());
  if (q == 0) throw ValidationError("ols_fit: nothing to estimate");
  if (problem.theta.size() != static_cast<Index>(model.n_params) ||
      problem.x0.size() != static_cast<Index>(model.n_states))
    throw ValidationError("ols_fit: initial guess has wrong dimension");

  const Vector lower = problem.lower.size() ? problem.lower : Vector::Zero(q);
  const Vector upper =
      problem.upper.size() ? problem.upper : Vector::Constant(q, std::numeric_limits<double>::infinity());
  if (lower.size() != q || upper.size() != q) throw ValidationError("ols_fit: bounds have wrong dimension");

  Vector v0(q);
  std::vector<std::string> names;
  {
    Index c = 0;
    for (auto j : sel.params) {
      v0[c++] = problem.theta[static_cast<Index>(j)];
      names.push_back(j < model.param_names.size() ? model.param_names[j] : "theta" + std::to_string(j));
    }
    for (auto j : sel.states) {
      v0[c++] = problem.x0[static_cast<Index>(j)];
      names.push_back((j < model.state_names.size() ? model.state_names[j] : "x" + std::to_string(j)) + "0");
    }
  }
  for (Index j = 0; j < q; ++j)
    if (!(v0[j] >= lower[j] && v0[j] <= upper[j]))
      throw ValidationError("ols_fit: initial guess for " + names[static_cast<std::size_t>(j)] + " violates its bounds");

  // Zero-bounded quantities are fitted in log coordinates.
  std::vector<bool> logc(static_cast<std::size_t>(q));
  for (Index j = 0; j < q; ++j)
    logc[static_cast<std::size_t>(j)] =
        opt.log_positive && lower[j] == 0.0 && std::isinf(upper[j]) && v0[j] > 0.0;

  const auto to_v = [&](const Vector& u) {
    Vector v(q);
    for (Index j = 0; j < q; ++j)
      v[j] = logc[static_cast<std::size_t>(j)] ? std::exp(u[j]) : std::clamp(u[j], lower[j], upper[j]);
    return v;
  };
  const auto unpack = [&](const Vector& v, Vector& theta, Vector& x0) {
    theta = problem.theta;
    x0 = problem.x0;
    Index c = 0;
    for (auto j : sel.params) theta[static_cast<Index>(j)] = v[c++];
    for (auto j : sel.states) x0[static_cast<Index>(j)] = v[c++];
  };

  const auto g = sample_grid(data.t);
  const auto eval_u = [&](const Vector& u) {
    const Vector v = to_v(u);
    Vector theta, x0;
    unpack(v, theta, x0);
    auto e = evaluate(model, theta, x0, sel, data, g, opt.integrator);
    for (Index j = 0; j < q; ++j)
      if (logc[static_cast<std::size_t>(j)]) e.J.col(j) *= v[j];
    return e;
  };

  Vector u(q);
  for (Index j = 0; j < q; ++j) u[j] = logc[static_cast<std::size_t>(j)] ? std::log(v0[j]) : v0[j];

  FitResult res;
  res.names = names;
  Evaluation cur = eval_u(u);
  double lambda = opt.damping;
  std::size_t small_decrease = 0;
  const double y_scale = std::max(data.y.norm(), std::numeric_limits<double>::min());
  res.stop_reason = "maximum iterations reached";

  for (res.iterations = 0; res.iterations < opt.max_iterations;) {
    // Residual at the level of integration error: the data are reproduced exactly.
    if (std::sqrt(cur.sse) <= 10.0 * opt.integrator.rel_tol * y_scale) {
      res.converged = true;
      res.stop_reason = "exact fit";
      break;
    }
    if (max_cosine(cur.J, cur.r) < opt.gtol) {
      res.converged = true;
      res.stop_reason = "gradient tolerance";
      break;
    }
    // Marquardt step: (JᵀJ + λ diag JᵀJ) δ = Jᵀ r, solved on the column-scaled Jacobian.
    Vector D = cur.J.colwise().norm().transpose();
    for (Index j = 0; j < q; ++j)
      if (!(D[j] > 0.0)) D[j] = 1.0;
    const Matrix Js = cur.J * D.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Matrix> svd(Js, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = svd.singularValues();
    const Vector Utr = svd.matrixU().transpose() * cur.r;
    Vector coef(s.size());
    for (Index i = 0; i < s.size(); ++i) coef[i] = s[i] / (s[i] * s[i] + lambda) * Utr[i];
    const Vector step = D.cwiseInverse().asDiagonal() * (svd.matrixV() * coef);
    Vector u_new = u + step;
    for (Index j = 0; j < q; ++j)
      if (!logc[static_cast<std::size_t>(j)]) u_new[j] = std::clamp(u_new[j], lower[j], upper[j]);

    ++res.iterations;
    std::optional<Evaluation> trial;
    try {
      trial = eval_u(u_new);
    } catch (const Error&) {
      trial.reset();
    }
    if (trial && trial->sse < cur.sse) {
      const double rel = (cur.sse - trial->sse) / cur.sse;
      const double dnorm = (u_new - u).norm();
      u = u_new;
      cur = std::move(*trial);
      lambda = std::max(lambda * opt.damping_down, 1e-15);
      small_decrease = rel < opt.ftol ? small_decrease + 1 : 0;
      if (small_decrease >= 3) {
        res.converged = true;
        res.stop_reason = "relative reduction tolerance";
        break;
      }
      if (dnorm <= opt.xtol * (u.norm() + opt.xtol)) {
        res.converged = true;
        res.stop_reason = "step tolerance";
        break;
      }
    } else {
      lambda *= opt.damping_up;
      if (lambda > 1e16) {
        res.stop_reason = "no further reduction possible";
        break;
      }
    }
  }

  res.estimate = to_v(u);
  unpack(res.estimate, res.theta_hat, res.x0_hat);
  res.sse = cur.sse;
  res.residuals = cur.r;
  res.dof = residual_dof(data, model.n_states, sel.size());
  res.sigma2_hat = res.dof > 0.0 ? res.sse / res.dof : std::numeric_limits<double>::quiet_NaN();
  return res;
}

FimReport fim_at_fit(const FitProblem& problem, const Dataset& data, const FitResult& fit, double level) {
  const auto g = sample_grid(data.t);
  const auto bundle = sensitivity_solve(problem.model, fit.theta_hat, fit.x0_hat, g.grid);
  const auto chi_grid = output_sensitivity(bundle, problem.model, fit.theta_hat, problem.free, data.outputs);
  std::vector<Matrix> chi;
  chi.reserve(data.size());
  for (auto gi : g.index) chi.push_back(chi_grid[gi]);
  return confidence_intervals(fit, fim(chi, fit.sigma2_hat), level);
}

}  // namespace epiobs
