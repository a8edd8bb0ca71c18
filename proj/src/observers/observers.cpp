#include "epiobs/observers/observers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "epiobs/error.hpp"

namespace epiobs {
namespace {

using Index = Eigen::Index;

double sat(double x, double lo, double hi) { return std::max(lo, std::min(hi, x)); }

double max_real(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().real().maxCoeff();
}

double rms_from(const ObserverRun& run, double fraction) {
  if (run.t.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double t0 = run.t.front();
  const double start = t0 + fraction * (run.t.back() - t0);
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < run.t.size(); ++i) {
    if (run.t[i] >= start - 1e-12) {
      s += run.error_norm[i] * run.error_norm[i];
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(s / static_cast<double>(n));
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

/// High-gain SIR parameters unpacked from θ = (β, γ, N, k).
struct HighGainParams {
  double beta, rho, N, k;
  [[nodiscard]] double z2_max() const { return k * rho * N; }
  [[nodiscard]] double ratio_lo() const { return -rho; }
  [[nodiscard]] double ratio_hi() const { return beta - rho; }
  [[nodiscard]] double u() const { return std::max(rho, beta - rho); }
  [[nodiscard]] double ratio(double z2, double z3) const {
    if (z2 == 0.0) return z3 > 0.0 ? ratio_hi() : (z3 < 0.0 ? ratio_lo() : sat(0.0, ratio_lo(), ratio_hi()));
    return sat(z3 / z2, ratio_lo(), ratio_hi());
  }
  /// max |ψ| over the admissible box, used as the outer saturation.
  [[nodiscard]] double psi_bound() const {
    const double zb = z2_max(), uu = u();
    return zb * uu * uu + beta / (N * k * rho) * uu * zb * zb + beta / (N * k) * zb * zb;
  }
  [[nodiscard]] double psi(double z2, double z3) const {
    const double raw = ratio(z2, z3) * z3 - beta / (N * k * rho) * z3 * z2 - beta / (N * k) * z2 * z2;
    const double B = psi_bound();
    return sat(raw, -B, B);
  }
};

HighGainParams high_gain_params(const ZooEntry& entry) {
  if (entry.id != "sir-cumulative-removed") {
    throw ValidationError("high-gain SIR observer needs the sir-cumulative-removed model, got '" + entry.id + "'");
  }
  const Vector& th = entry.default_params;
  return {th[0], th[1], th[2], th[3]};
}

}  // namespace

std::string to_string(ObserverFamily f) {
  switch (f) {
    case ObserverFamily::Luenberger: return "luenberger-linear-up-to-output";
    case ObserverFamily::ChangeOfCoordinates: return "change-of-coordinates";
    case ObserverFamily::ReducedOrder: return "reduced-order";
    case ObserverFamily::HighGain: return "high-gain";
  }
  return "luenberger-linear-up-to-output";
}

ObserverFamily parse_family(const std::string& s) {
  if (s == "luenberger-linear-up-to-output" || s == "luenberger") return ObserverFamily::Luenberger;
  if (s == "change-of-coordinates" || s == "malaria") return ObserverFamily::ChangeOfCoordinates;
  if (s == "reduced-order") return ObserverFamily::ReducedOrder;
  if (s == "high-gain" || s == "high-gain-sir") return ObserverFamily::HighGain;
  throw UsageError("unknown observer family '" + s +
                   "' (expected luenberger-linear-up-to-output|change-of-coordinates|reduced-order|high-gain)");
}

// ---------------------------------------------------------------------------------------------

ObserverDynamics luenberger_dynamics(const ZooEntry& entry, const GainVector& G) {
  if (!entry.linear_form) throw ValidationError(entry.id + " is not linear up to output injection");
  const auto& lf = *entry.linear_form;
  if (G.g.size() != lf.A.rows() || lf.C.rows() != 1) throw ValidationError("luenberger: gain dimension mismatch");

  ObserverDynamics d;
  d.family = ObserverFamily::Luenberger;
  d.dim = static_cast<std::size_t>(lf.A.rows());
  const Matrix A = lf.A, C = lf.C;
  const Vector g = G.g;
  const auto phi = lf.phi;
  d.rhs = [A, C, g, phi](double t, const Vector& xi, const Vector& y) -> Vector {
    return A * xi + phi(t, y) + g * (C * xi - y);
  };
  d.estimate = [](double, const Vector& xi, const Vector&) { return xi; };
  d.innovation = [C](double, const Vector& xi, const Vector& y) -> Vector { return C * xi - y; };
  d.lift = [](const Vector& xhat, const Vector&) { return xhat; };
  d.report_names = entry.spec.state_names;
  d.predicted_rate = max_real(A + g * C);
  return d;
}

ObserverDynamics malaria_dynamics(const ZooEntry& entry, const Vector& L) {
  if (entry.id != "malaria") throw ValidationError("change-of-coordinates observer needs the malaria model");
  if (L.size() != 7) throw ValidationError("malaria observer: gain must have 7 entries");
  const auto mm = malaria_matrices(entry.default_params);
  const Matrix M = mm.A_bar - L * mm.C;
  const Vector inj = L + M * mm.E;
  const Vector src = mm.Lambda * mm.e1;

  ObserverDynamics d;
  d.family = ObserverFamily::ChangeOfCoordinates;
  d.dim = 7;
  d.rhs = [M, inj, src](double, const Vector& w, const Vector& y) -> Vector { return M * w + inj * y[0] + src; };
  const Vector E = mm.E;
  const Matrix C = mm.C;
  d.estimate = [E](double, const Vector& w, const Vector& y) -> Vector { return w + E * y[0]; };
  d.innovation = [E, C](double, const Vector& w, const Vector& y) -> Vector { return C * (w + E * y[0]) - y; };
  d.lift = [E](const Vector& xhat, const Vector& y) -> Vector { return xhat - E * y[0]; };
  d.report_names = entry.spec.state_names;
  d.predicted_rate = max_real(M);
  return d;
}

ObserverDynamics reduced_order_dynamics(const ZooEntry& entry) {
  if (entry.id != "sir-fluctuating") throw ValidationError("reduced-order observer needs the sir-fluctuating model");
  const double nu = entry.default_params[0], mu = entry.default_params[1], N = entry.default_params[2];
  if (std::abs(nu - mu) > 1e-12 * std::max(nu, mu)) {
    throw ValidationError("reduced-order observer assumes a constant population (nu = mu)");
  }

  ObserverDynamics d;
  d.family = ObserverFamily::ReducedOrder;
  d.dim = 1;
  d.rhs = [nu, mu, N](double, const Vector& Z, const Vector& y) {
    Vector dz(1);
    dz[0] = nu * N - y[1] - mu * Z[0];
    return dz;
  };
  d.estimate = [N](double, const Vector& Z, const Vector& y) {
    Vector x(3);
    x << Z[0] - y[0], y[0], N - Z[0];
    return x;
  };
  d.lift = [](const Vector& xhat, const Vector& y) {
    Vector Z(1);
    Z[0] = xhat[0] + y[0];
    return Z;
  };
  d.report_names = entry.spec.state_names;
  d.predicted_rate = -mu;
  return d;
}

double high_gain_sir_lipschitz(double beta, double rho, double N, double k) {
  if (!(beta > 0 && rho > 0 && N > 0 && k > 0)) throw ValidationError("high_gain_sir_lipschitz: positive inputs");
  const double u = std::max(rho, beta - rho);
  const double zb = k * rho * N;
  // |∇(sat(z3/z2) z3)| ≤ √(u⁴ + 4u²); bilinear and quadratic terms bounded on the box.
  return std::sqrt(u * u * u * u + 4.0 * u * u) + beta / (N * k * rho) * zb * std::sqrt(1.0 + u * u) +
         2.0 * beta / (N * k) * zb;
}

Vector high_gain_sir_coordinates(const Vector& x, const Vector& th) {
  const double beta = th[0], rho = th[1], N = th[2], k = th[3];
  Vector z(3);
  z[0] = x[2];
  z[1] = k * rho * x[1];
  z[2] = (beta * x[0] / N - rho) * z[1];
  return z;
}

ObserverDynamics high_gain_sir_dynamics(const ZooEntry& entry, const Vector& lambda) {
  const auto p = high_gain_params(entry);
  if (lambda.size() != 3) throw ValidationError("high-gain SIR observer: spectrum must have 3 entries");
  if ((lambda.array() >= 0.0).any()) throw ValidationError("high-gain SIR observer: eigenvalues must be negative");
  (void)vandermonde_inverse(lambda);  // rejects coincident eigenvalues

  const auto [A, C] = canonical_pair(3);
  const Vector g = pole_place_gain(A, C, lambda).g;

  ObserverDynamics d;
  d.family = ObserverFamily::HighGain;
  d.dim = 3;
  d.rhs = [p, g](double, const Vector& z, const Vector& y) {
    const double e = z[0] - y[0];
    Vector dz(3);
    dz << z[1] + g[0] * e, z[2] + g[1] * e, p.psi(z[1], z[2]) + g[2] * e;
    return dz;
  };
  d.estimate = [p](double, const Vector& z, const Vector&) {
    Vector x(3);
    x[0] = p.N / p.beta * (p.ratio(z[1], z[2]) + p.rho);
    x[1] = z[1] / (p.k * p.rho);
    x[2] = p.N - x[0] - x[1];
    return x;
  };
  d.innovation = [](double, const Vector& z, const Vector& y) {
    Vector r(1);
    r[0] = z[0] - y[0];
    return r;
  };
  d.lift = [p](const Vector& xhat, const Vector& y) {
    Vector z(3);
    z[0] = y[0];
    z[1] = p.k * p.rho * xhat[1];
    z[2] = (p.beta * xhat[0] / p.N - p.rho) * z[1];
    return z;
  };
  d.report_truth = [p](const Vector& x) {
    Vector r(3);
    r << x[0], x[1], p.N - x[0] - x[1];
    return r;
  };
  d.flag = [](const Vector& z) { return z[1] <= 0.0; };
  d.flag_message = "z2 estimate reached zero or below; saturation kept the estimates finite";
  d.report_names = {"S", "I", "R"};
  d.predicted_rate = high_gain_rate_bound(lambda, high_gain_sir_lipschitz(p.beta, p.rho, p.N, p.k));
  return d;
}

// ---------------------------------------------------------------------------------------------

double ObserverRun::tail_error() const { return rms_from(*this, 0.9); }

double ObserverRun::steady_state_error() const { return rms_from(*this, 0.5); }

double ObserverRun::time_to_fraction(double fraction) const {
  if (t.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double threshold = fraction * error_norm.front();
  std::size_t last_above = t.size();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (error_norm[i] > threshold) last_above = i;
  }
  if (last_above == t.size()) return t.front();
  if (last_above + 1 >= t.size()) return std::numeric_limits<double>::quiet_NaN();
  return t[last_above + 1];
}

double empirical_decay_rate(const std::vector<double>& t, const std::vector<double>& e) {
  if (t.size() != e.size() || t.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double t0 = t.front(), T = t.back() - t0;
  const double lo = t0 + 0.3 * T, hi = t0 + 0.9 * T;
  const double floor = 1e3 * std::numeric_limits<double>::epsilon();
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < lo - 1e-12 || t[i] > hi + 1e-12 || !(e[i] >= floor)) continue;
    const double y = std::log(e[i]);
    n += 1;
    sx += t[i];
    sy += y;
    sxx += t[i] * t[i];
    sxy += t[i] * y;
  }
  const double den = n * sxx - sx * sx;
  if (n < 3 || den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

ObserverRun run_observer(const ZooEntry& entry, const ObserverDynamics& dyn, const Vector& xi0,
                         const RunSetup& setup) {
  const auto& spec = entry.spec;
  const Vector theta = entry.default_params;
  const auto n = static_cast<Index>(spec.n_states);
  const auto d = static_cast<Index>(dyn.dim);
  if (setup.x0.size() != n) throw ValidationError("run_observer: initial state has wrong dimension");
  if (xi0.size() != d) throw ValidationError("run_observer: observer initial state has wrong dimension");
  if (setup.grid.size() < 2) throw ValidationError("run_observer: grid needs at least two points");

  ObserverRun run;
  run.family = dyn.family;
  run.state_names = dyn.report_names;
  run.predicted_rate = dyn.predicted_rate;

  const MeasurementStream* stream = setup.stream ? &*setup.stream : nullptr;
  if (stream && stream->t_end < setup.grid.back() - 1e-9) {
    run.warnings.push_back("measurement stream ends at t = " + fmt(stream->t_end) + " before the horizon " +
                           fmt(setup.grid.back()) + "; the last value is held");
  }
  const auto measure = [&](double t, const Vector& x) -> Vector {
    return stream ? (*stream)(t) : spec.h(t, x, theta);
  };

  const OdeRhs rhs = [&](double t, const Vector& s) {
    const Vector x = s.head(n);
    Vector ds(n + d);
    ds.head(n) = spec.f(t, x, theta);
    ds.tail(d) = dyn.rhs(t, s.tail(d), measure(t, x));
    return ds;
  };
  Vector s0(n + d);
  s0 << setup.x0, xi0;
  const auto sol = solve_ode(rhs, s0, setup.grid, setup.integrator);

  for (std::size_t i = 0; i < sol.t.size(); ++i) {
    const double t = sol.t[i];
    const Vector x = sol.x[i].head(n);
    const Vector xi = sol.x[i].tail(d);
    const Vector y = measure(t, x);
    const Vector truth = dyn.report_truth ? dyn.report_truth(x) : x;
    const Vector xhat = dyn.estimate(t, xi, y);
    run.t.push_back(t);
    run.x_true.push_back(truth);
    run.x_hat.push_back(xhat);
    run.error_norm.push_back((xhat - truth).norm());
    if (dyn.innovation) run.innovation.push_back(dyn.innovation(t, xi, y));
    if (dyn.flag && dyn.flag(xi)) ++run.flagged_samples;
  }
  if (run.flagged_samples > 0 && !dyn.flag_message.empty()) {
    run.warnings.push_back(dyn.flag_message + " (" + std::to_string(run.flagged_samples) + " samples)");
  }
  run.empirical_decay_rate = empirical_decay_rate(run.t, run.error_norm);
  return run;
}

ObserverRun run_luenberger(const ZooEntry& entry, const GainVector& G, const Vector& xhat0, const RunSetup& setup) {
  return run_observer(entry, luenberger_dynamics(entry, G), xhat0, setup);
}

ObserverRun run_malaria_observer(const ZooEntry& entry, const Vector& L, const Vector& w0, const RunSetup& setup) {
  return run_observer(entry, malaria_dynamics(entry, L), w0, setup);
}

ObserverRun run_reduced_order(const ZooEntry& entry, double Z0, const RunSetup& setup) {
  Vector z(1);
  z[0] = Z0;
  return run_observer(entry, reduced_order_dynamics(entry), z, setup);
}

ObserverRun run_high_gain_sir(const ZooEntry& entry, const Vector& lambda, const Vector& z0, const RunSetup& setup) {
  return run_observer(entry, high_gain_sir_dynamics(entry, lambda), z0, setup);
}

// ---------------------------------------------------------------------------------------------

ObserverConfig default_observer_config(ObserverFamily family, std::uint64_t seed) {
  ObserverConfig c;
  c.family = family;
  switch (family) {
    case ObserverFamily::Luenberger:
      c.entry = zoo_by_id("three-stage", seed);
      c.spectrum = Vector(3);
      c.spectrum << -0.09, -0.099, -0.108;  // 0.3·{−0.3, −0.33, −0.36}
      c.x0 = c.entry.default_x0;
      c.xhat0 = Vector(3);
      c.xhat0 << 1.0, 1.0, 5.0;
      c.horizon = 200.0;
      c.report_step = 0.5;
      break;
    case ObserverFamily::ChangeOfCoordinates:
      c.entry = zoo_by_id("malaria", seed);
      c.gain = Vector::Zero(7);
      c.gain[1] = 5.0;
      c.gain[2] = 5.0;
      c.x0 = c.entry.default_x0;
      c.xhat0 = c.x0;
      c.xhat0[0] *= 0.8;
      c.xhat0[6] = 0.5 * c.x0[6];
      c.horizon = 200.0;
      c.report_step = 0.5;
      break;
    case ObserverFamily::ReducedOrder:
      c.entry = sir_fluctuating_default(seed, 200.0);
      c.x0 = c.entry.default_x0;
      c.xhat0 = Vector(3);
      c.xhat0 << 700.0, c.x0[1], 1000.0 - 700.0 - c.x0[1];
      c.horizon = 200.0;
      c.report_step = 0.5;
      break;
    case ObserverFamily::HighGain:
      c.entry = zoo_by_id("sir-cumulative-removed", seed);
      c.spectrum = Vector(3);
      c.spectrum << -2.0, -2.2, -2.4;
      c.x0 = c.entry.default_x0;
      c.xhat0 = Vector(3);
      c.xhat0 << 8000.0, 30.0, 1970.0;
      c.horizon = 40.0;
      c.report_step = 0.05;
      break;
  }
  return c;
}

ObserverDynamics make_dynamics(const ObserverConfig& c) {
  switch (c.family) {
    case ObserverFamily::Luenberger: {
      if (!c.entry.linear_form) throw ValidationError(c.entry.id + " is not linear up to output injection");
      return luenberger_dynamics(c.entry, pole_place_gain(c.entry.linear_form->A, c.entry.linear_form->C, c.spectrum));
    }
    case ObserverFamily::ChangeOfCoordinates: return malaria_dynamics(c.entry, c.gain);
    case ObserverFamily::ReducedOrder: return reduced_order_dynamics(c.entry);
    case ObserverFamily::HighGain: return high_gain_sir_dynamics(c.entry, c.spectrum);
  }
  throw ValidationError("unknown observer family");
}

ObserverRun simulate_with_noise(const ObserverConfig& c, const NoiseSpec& noise, std::uint64_t seed) {
  if (!(c.horizon > 0.0) || !(c.report_step > 0.0)) throw ValidationError("simulate_with_noise: bad horizon/step");
  const auto dyn = make_dynamics(c);
  RunSetup setup;
  setup.x0 = c.x0;
  setup.integrator = c.integrator;
  const auto n_report = static_cast<std::size_t>(std::llround(c.horizon / c.report_step));
  setup.grid = uniform_grid(0.0, c.horizon, std::max<std::size_t>(n_report, 1));

  const Vector& theta = c.entry.default_params;
  Vector y0 = c.entry.spec.h(0.0, c.x0, theta);
  if (!noise.exact()) {
    if (!(noise.sample_step > 0.0)) throw ValidationError("simulate_with_noise: sample step must be positive");
    // The record runs a few samples past the horizon so spline end effects stay outside the report window.
    const auto n_samples = static_cast<std::size_t>(std::ceil(c.horizon / noise.sample_step - 1e-9)) + 5;
    std::vector<double> ts(n_samples + 1);
    for (std::size_t k = 0; k <= n_samples; ++k) ts[k] = noise.sample_step * static_cast<double>(k);
    auto samples = integrate(c.entry.spec, c.x0, theta, ts, c.integrator).y;
    apply_noise(samples, noise, seed);
    setup.stream = spline_stream(0.0, noise.sample_step, samples);
    y0 = (*setup.stream)(0.0);
  }
  return run_observer(c.entry, dyn, dyn.lift(c.xhat0, y0), setup);
}

}  // namespace epiobs
