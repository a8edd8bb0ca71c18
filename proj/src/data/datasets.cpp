#include "epiobs/data/datasets.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "epiobs/data/io.hpp"
#include "epiobs/error.hpp"
#include "epiobs/zoo/zoo.hpp"

namespace epiobs {

namespace {

using Eigen::Index;

std::vector<double> days(std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i);
  return t;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double rel_err(double v, double e) { return std::abs(v - e) / std::abs(e); }

Check rel_check(std::string name, double value, double expected, double tol) {
  return {std::move(name), value, expected, "rel <= " + std::to_string(tol), rel_err(value, expected) <= tol};
}
Check abs_check(std::string name, double value, double expected, double tol) {
  return {std::move(name), value, expected, "abs <= " + std::to_string(tol), std::abs(value - expected) <= tol};
}
Check below(std::string name, double value, double bound) {
  return {std::move(name), value, bound, "value < expected", value < bound};
}
Check at_most(std::string name, double value, double bound) {
  return {std::move(name), value, bound, "value <= expected", value <= bound};
}
Check above(std::string name, double value, double bound) {
  return {std::move(name), value, bound, "value > expected", value > bound};
}
Check at_least(std::string name, double value, double bound) {
  return {std::move(name), value, bound, "value >= expected", value >= bound};
}
Check holds(std::string name, bool ok) { return {std::move(name), ok ? 1.0 : 0.0, 1.0, "true", ok}; }

// Reported optimum of the plague session (β̃, γ, S0, I0).
constexpr double kBombayBeta = 8.552408800e-05;
constexpr double kBombayGamma = 3.7161743;
constexpr double kBombayS0 = 48113.13;
constexpr double kBombayI0 = 1.4213612;

void boarding_checks(CaseStudyReport& r) {
  const auto& f = r.fit;
  const auto& m = r.fim;
  auto& c = r.checks;
  c.push_back(holds("fit converged", f.converged));
  c.push_back(rel_check("beta", f.estimate[0], 1.9605032, 5e-3));
  c.push_back(rel_check("gamma", f.estimate[1], 0.4751562, 5e-3));
  c.push_back(rel_check("sse", f.sse, 4892.6472, 5e-3));
  c.push_back(rel_check("sigma2_hat", f.sigma2_hat, 407.72060, 5e-3));
  c.push_back(rel_check("fim[0][0]", m.fim(0, 0), 974.5073, 5e-3));
  c.push_back(rel_check("fim[0][1]", m.fim(0, 1), -523.73985, 5e-3));
  c.push_back(rel_check("fim[1][0]", m.fim(1, 0), -523.73985, 5e-3));
  c.push_back(rel_check("fim[1][1]", m.fim(1, 1), 3132.2047, 5e-3));
  c.push_back(rel_check("condition_number", m.condition_number, 3.8082403, 1e-2));
  c.push_back(rel_check("half_width beta", m.half_widths[0], 0.0731602, 1e-2));
  c.push_back(rel_check("half_width gamma", m.half_widths[1], 0.0408077, 1e-2));
  c.push_back(abs_check("t_quantile(12)", m.t_quantile, 2.1788128, 1e-4));
  c.push_back(below("condition_number (identifiable)", m.condition_number, 10.0));
  c.push_back(below("half_width/|beta|", m.half_widths[0] / std::abs(f.estimate[0]), 0.1));
  c.push_back(below("half_width/|gamma|", m.half_widths[1] / std::abs(f.estimate[1]), 0.1));
  c.push_back(below("runtime_seconds", r.runtime_seconds, 10.0));
}

void bombay_checks(CaseStudyReport& r, const CaseStudy& cs) {
  const auto& f = r.fit;
  const auto& m = r.fim;
  auto& c = r.checks;
  // The least-squares problem has no finite minimizer (SSE keeps decreasing as γ, S0 → ∞ along
  // the ridge), so an iteration-budget stop on the flagged ridge is the expected outcome.
  const bool on_ridge = m.ill_conditioned && f.sse <= 1.01 * 106336.49;
  c.push_back(holds("fit converged, or budget spent descending the ill-conditioned ridge", f.converged || on_ridge));
  c.push_back(at_most("sse", f.sse, 1.01 * 106336.49));
  const bool near = rel_err(f.estimate[1], kBombayGamma) <= 0.05 && rel_err(f.estimate[2], kBombayS0) <= 0.05;
  c.push_back(holds("gamma and S0 within 5% of the reported optimum, or ill-conditioned", near || m.ill_conditioned));
  c.push_back(holds("ill_conditioned", m.ill_conditioned));
  c.push_back(at_least("condition_number", m.condition_number, 1e20));
  c.push_back(above("half_width/|gamma|", m.half_widths[1] / std::abs(f.estimate[1]), 5.0));
  c.push_back(above("half_width/|S0|", m.half_widths[2] / std::abs(f.estimate[2]), 5.0));
  c.push_back(above("half_width/|I0|", m.half_widths[3] / std::abs(f.estimate[3]), 5.0));
  c.push_back(abs_check("t_quantile(25)", m.t_quantile, 2.0595386, 1e-4));
  c.push_back(below("runtime_seconds", r.runtime_seconds, 30.0));

  // The reported optimum, analysed with the chain-rule and the session γ-column.
  FitResult p;
  p.theta_hat = cs.guess.theta;
  p.theta_hat[0] = kBombayBeta;
  p.theta_hat[1] = kBombayGamma;
  p.x0_hat = vec({kBombayS0, kBombayI0});
  p.estimate = vec({kBombayBeta, kBombayGamma, kBombayS0, kBombayI0});
  p.names = f.names;
  p.sse = fit_residuals(cs.guess.model, p.theta_hat, p.x0_hat, cs.dataset).squaredNorm();
  p.dof = f.dof;
  p.sigma2_hat = p.sse / p.dof;
  const auto chain = fim_at_fit(cs.guess, cs.dataset, p);
  const auto bundle = sensitivity_solve(cs.guess.model, p.theta_hat, p.x0_hat, cs.dataset.t);
  const auto session = confidence_intervals(p, fim(bombay_session_chi(bundle, p.theta_hat), p.sigma2_hat));
  c.push_back(rel_check("reported optimum: sse", p.sse, 106336.49, 1e-2));
  c.push_back(rel_check("reported optimum, session columns: condition_number", session.condition_number, 9.141e24,
                        5e-2));
  c.push_back(rel_check("reported optimum, session columns: half_width gamma", session.half_widths[1], 25.255243,
                        5e-2));
  c.push_back(rel_check("reported optimum, session columns: half_width S0", session.half_widths[2], 593794.26,
                        5e-2));
  c.push_back(rel_check("reported optimum, chain rule: half_width gamma", chain.half_widths[1], 25.255243, 5e-2));
  c.push_back(at_least("reported optimum, chain rule: condition_number", chain.condition_number, 1e20));
  r.extra["fit_note"] =
      f.converged ? "converged"
                  : "stopped by the iteration budget while still descending: along gamma, S0 -> inf with gamma*I0 "
                    "fixed the model tends to a gamma-free limit, so the residual sum has no finite minimizer";
  r.extra["reported_optimum"] = {{"fit", to_json(p)},
                                 {"chain_rule", to_json(chain)},
                                 {"session_columns", to_json(session)}};
}

}  // namespace

Dataset dataset_boarding_school() {
  return make_dataset("boarding-school", days(14), {1, 6, 26, 73, 222, 293, 258, 237, 191, 124, 68, 26, 10, 3}, 0,
                      DofConvention::KnownX0);
}

Dataset dataset_bombay() {
  return make_dataset("bombay", days(31),
                      {8,   10,  12,  16,  24,  48,  51,  92,  124, 178, 280, 387, 442, 644, 779, 702,
                       695, 870, 925, 802, 578, 404, 296, 162, 106, 64,  46,  35,  27,  28,  24},
                      0, DofConvention::EstimatedX0);
}

std::vector<std::string> case_study_ids() { return {"boarding-school", "bombay"}; }

CaseStudy case_study(const std::string& id) {
  if (id == "boarding-school") {
    const auto e = zoo_by_id("sir-classical");
    return {id, e.id, dataset_boarding_school(), {e.spec, vec({2.0, 0.5, 763.0, 1.0}), vec({762.0, 1.0}), {{0, 1}, {}}, {}, {}}};
  }
  if (id == "bombay") {
    const auto e = zoo_by_id("sir-bombay");
    Vector theta = e.default_params;
    theta[0] = 8e-5;
    theta[1] = 0.6;
    return {id, e.id, dataset_bombay(), {e.spec, theta, vec({15000.0, 7.0}), {{0, 1}, {0, 1}}, {}, {}}};
  }
  throw UsageError("unknown case study '" + id + "' (expected boarding-school|bombay)");
}

CaseStudyReport run_case_study(const std::string& id, const FitOptions& opt) {
  const auto cs = case_study(id);
  CaseStudyReport r;
  r.id = id;
  r.extra = nlohmann::json::object();
  const auto start = std::chrono::steady_clock::now();
  r.fit = ols_fit(cs.guess, cs.dataset, opt);
  r.fim = fim_at_fit(cs.guess, cs.dataset, r.fit);
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (id == "boarding-school")
    boarding_checks(r);
  else
    bombay_checks(r, cs);
  r.pass = true;
  for (const auto& c : r.checks) r.pass = r.pass && c.pass;
  return r;
}

nlohmann::json CaseStudyReport::to_json() const {
  auto checks_j = nlohmann::json::array();
  for (const auto& c : checks)
    checks_j.push_back(
        {{"name", c.name}, {"value", c.value}, {"expected", c.expected}, {"rule", c.rule}, {"pass", c.pass}});
  return {{"case_study", id},        {"pass", pass},   {"runtime_seconds", runtime_seconds},
          {"fit", epiobs::to_json(fit)}, {"fim", epiobs::to_json(fim)}, {"checks", checks_j},
          {"extra", extra}};
}

void emit_case_study_curve(const CaseStudy& cs, const FitResult& fit, const std::string& path, double resolution) {
  const auto& d = cs.dataset;
  const double t0 = d.t.front();
  const double t1 = d.t.back();
  const auto n = static_cast<std::size_t>(std::llround((t1 - t0) / resolution));
  const auto grid = uniform_grid(t0, t1, std::max<std::size_t>(n, 1));
  const auto traj = integrate(cs.guess.model, fit.x0_hat, fit.theta_hat, grid, sensitivity_integrator());
  CsvTable table;
  table.header = {"t", "data", "fitted"};
  std::size_t next = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double datum = std::numeric_limits<double>::quiet_NaN();
    if (next < d.size() && std::abs(grid[i] - d.t[next]) <= 1e-9 * std::max(1.0, std::abs(grid[i])))
      datum = d.y(static_cast<Index>(next++), 0);
    table.rows.push_back({grid[i], datum, traj.y[i][static_cast<Index>(d.outputs.front())]});
  }
  write_csv(table, path);
}

std::vector<Matrix> bombay_session_chi(const SensitivityBundle& bundle, const Vector& theta) {
  const double gamma = theta[1];
  std::vector<Matrix> chi;
  chi.reserve(bundle.t.size());
  for (std::size_t i = 0; i < bundle.t.size(); ++i) {
    Matrix c(1, 4);
    c << gamma * bundle.z[i](1, 0), gamma * (bundle.z[i](1, 1) + bundle.x[i][1]), gamma * bundle.w[i](1, 0),
        gamma * bundle.w[i](1, 1);
    chi.push_back(std::move(c));
  }
  return chi;
}

}  // namespace epiobs
