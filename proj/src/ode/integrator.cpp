#include "epiobs/ode/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "epiobs/error.hpp"

namespace epiobs {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// b - b_hat
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

// PI controller constants (Hairer & Wanner, DOPRI5).
constexpr double kBeta = 0.04;
constexpr double kAlpha = 0.2 - kBeta * 0.75;
constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;   // largest shrink per step
constexpr double kFacMax = 10.0;  // largest growth per step

struct Stepper {
  const OdeRhs& rhs;
  const IntegratorOptions& opt;
  IntegratorStats stats;

  Vector eval(double t, const Vector& x) {
    ++stats.evaluations;
    return rhs(t, x);
  }

  double error_norm(const Vector& x, const Vector& xn, const Vector& err) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(x[i]), std::abs(xn[i]));
      const double r = err[i] / sc;
      acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(x.size(), 1)));
  }

  // Hairer's starting-step heuristic.
  double initial_step(double t, const Vector& x, const Vector& k1, double span) {
    Vector sc(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) sc[i] = opt.abs_tol + opt.rel_tol * std::abs(x[i]);
    const double n = static_cast<double>(std::max<Eigen::Index>(x.size(), 1));
    const double d0 = std::sqrt(x.cwiseQuotient(sc).squaredNorm() / n);
    const double d1 = std::sqrt(k1.cwiseQuotient(sc).squaredNorm() / n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min({h0, span, opt.max_step});
    const Vector x1 = x + h0 * k1;
    const Vector k2 = eval(t + h0, x1);
    if (!k2.allFinite()) return h0 * 1e-3;
    const double d2 = std::sqrt((k2 - k1).cwiseQuotient(sc).squaredNorm() / n) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min({100.0 * h0, h1, span, opt.max_step});
  }
};

std::string fmt_time(double t) {
  std::ostringstream os;
  os.precision(17);
  os << t;
  return os.str();
}

}  // namespace

OdeSolution solve_ode(const OdeRhs& rhs, const Vector& x0, const std::vector<double>& grid,
                      const IntegratorOptions& opt) {
  if (grid.empty()) throw ValidationError("solve_ode: empty time grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ValidationError("solve_ode: time grid must be strictly increasing");
  }
  if (!x0.allFinite()) throw ValidationError("solve_ode: non-finite initial state");
  if (!(opt.rel_tol > 0.0) || !(opt.abs_tol > 0.0)) throw ValidationError("solve_ode: tolerances must be positive");

  Stepper st{rhs, opt, {}};
  OdeSolution sol;
  sol.t = grid;
  sol.x.reserve(grid.size());
  sol.x.push_back(x0);
  if (grid.size() == 1) return sol;

  double t = grid.front();
  Vector x = x0;
  Vector k1 = st.eval(t, x);
  if (!k1.allFinite()) throw DomainError("solve_ode: non-finite derivative at t=" + fmt_time(t));

  const bool fixed = opt.fixed_step > 0.0;
  double h = fixed ? opt.fixed_step
                   : (opt.initial_step > 0.0 ? opt.initial_step : st.initial_step(t, x, k1, grid.back() - t));
  double err_old = 1e-4;
  bool last_rejected = false;
  bool last_nonfinite = false;
  std::size_t steps = 0;

  Vector k2, k3, k4, k5, k6, k7, xs, xn, err;
  for (std::size_t gi = 1; gi < grid.size(); ++gi) {
    const double target = grid[gi];
    while (t < target) {
      if (++steps > opt.max_steps) throw IntegrationError("solve_ode: step budget exhausted", t);
      // Clip to the next grid point; remember the unclipped proposal.
      const double h_prop = std::min(h, opt.max_step);
      double hs = h_prop;
      bool clipped = false;
      if (t + hs >= target || target - (t + hs) <= 1e-12 * std::abs(target)) {
        hs = target - t;
        clipped = true;
      }
      if (!fixed && hs <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0)) {
        if (last_nonfinite) throw DomainError("solve_ode: non-finite derivative near t=" + fmt_time(t));
        throw IntegrationError("solve_ode: step size underflow at t=" + fmt_time(t), t);
      }

      xs = x + hs * a21 * k1;
      k2 = st.eval(t + c2 * hs, xs);
      xs = x + hs * (a31 * k1 + a32 * k2);
      k3 = st.eval(t + c3 * hs, xs);
      xs = x + hs * (a41 * k1 + a42 * k2 + a43 * k3);
      k4 = st.eval(t + c4 * hs, xs);
      xs = x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      k5 = st.eval(t + c5 * hs, xs);
      xs = x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      k6 = st.eval(t + hs, xs);
      xn = x + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      const double tn = clipped ? target : t + hs;
      k7 = st.eval(tn, xn);

      if (fixed) {
        if (!xn.allFinite() || !k7.allFinite()) throw DomainError("solve_ode: non-finite state at t=" + fmt_time(tn));
        t = tn;
        x = xn;
        k1 = k7;
        ++st.stats.accepted;
        continue;
      }

      err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const bool finite = xn.allFinite() && k7.allFinite() && err.allFinite();
      const double en = finite ? st.error_norm(x, xn, err) : std::numeric_limits<double>::infinity();

      if (en <= 1.0) {
        t = tn;
        x = xn;
        k1 = k7;
        ++st.stats.accepted;
        const double fac11 = std::pow(std::max(en, 1e-16), kAlpha);
        double fac = fac11 / std::pow(err_old, kBeta) / kSafety;
        fac = std::clamp(fac, 1.0 / kFacMax, 1.0 / kFacMin);
        double h_new = hs / fac;
        if (last_rejected) h_new = std::min(h_new, hs);
        err_old = std::max(en, 1e-4);
        last_rejected = false;
        last_nonfinite = false;
        // A grid-clipped step says little about the natural step; keep the proposal.
        h = clipped ? std::max(h_new, std::min(h_prop, h_new * kFacMax)) : h_new;
      } else {
        ++st.stats.rejected;
        last_rejected = true;
        last_nonfinite = !finite;
        if (!finite) {
          h = 0.25 * hs;
        } else {
          const double fac11 = std::pow(en, kAlpha);
          h = hs / std::min(1.0 / kFacMin, fac11 / kSafety);
        }
      }
    }
    sol.x.push_back(x);
  }
  sol.stats = st.stats;
  return sol;
}

Trajectory integrate(const ModelSpec& model, const Vector& x0, const Vector& theta, const std::vector<double>& grid,
                     const IntegratorOptions& opt) {
  if (static_cast<std::size_t>(x0.size()) != model.n_states) throw ValidationError("integrate: x0 has wrong length");
  if (static_cast<std::size_t>(theta.size()) != model.n_params) {
    throw ValidationError("integrate: theta has wrong length");
  }
  auto sol = solve_ode([&](double t, const Vector& x) { return model.f(t, x, theta); }, x0, grid, opt);
  Trajectory tr;
  tr.t = std::move(sol.t);
  tr.x = std::move(sol.x);
  tr.y.reserve(tr.x.size());
  for (std::size_t i = 0; i < tr.x.size(); ++i) tr.y.push_back(model.h(tr.t[i], tr.x[i], theta));
  return tr;
}

}  // namespace epiobs
