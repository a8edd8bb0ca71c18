#include "epiobs/zoo/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "epiobs/error.hpp"

namespace epiobs {
namespace {

using Index = Eigen::Index;

void require_positive(const std::string& id, std::initializer_list<std::pair<const char*, double>> params) {
  for (const auto& [name, v] : params) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      std::ostringstream os;
      os << id << ": parameter " << name << " must be positive and finite (got " << v << ")";
      throw ValidationError(os.str());
    }
  }
}

bool all_nonneg(const Vector& v, double tol = 0.0) { return (v.array() >= -tol).all(); }
bool all_pos(const Vector& v) { return (v.array() > 0.0).all() && v.allFinite(); }

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// θ_i · U[0.5, 1.5] for every entry.
Vector jitter(const Vector& base, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Vector out = base;
  for (Index i = 0; i < out.size(); ++i) out[i] *= u(rng);
  return out;
}

double uniform(std::mt19937_64& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

// ---------------------------------------------------------------------------------------------
// SIR core: derivatives of the incidence term for both incidence laws.
// θ = (b, γ, N, k); incidence J = b S I / N (normalized) or b S I (mass action).

struct Incid {
  double J, dS, dI, db, dN;
};

Incid incidence(Incidence law, double S, double I, const Vector& th) {
  const double b = th[0], N = th[2];
  if (law == Incidence::MassAction) return {b * S * I, b * I, b * S, S * I, 0.0};
  return {b * S * I / N, b * I / N, b * S / N, S * I / N, -b * S * I / (N * N)};
}

void sir_output_maps(ModelSpec& s, SirOutput out, Index i_index) {
  const auto n = static_cast<Index>(s.n_states);
  if (out == SirOutput::Prevalence) {
    s.h = [i_index](double, const Vector& x, const Vector& th) { return vec({th[3] * x[i_index]}); };
    s.jac_h_x = [n, i_index](double, const Vector&, const Vector& th) {
      Matrix J = Matrix::Zero(1, n);
      J(0, i_index) = th[3];
      return J;
    };
    s.jac_h_theta = [i_index](double, const Vector& x, const Vector&) {
      Matrix J = Matrix::Zero(1, 4);
      J(0, 3) = x[i_index];
      return J;
    };
  } else {
    s.h = [i_index](double, const Vector& x, const Vector& th) { return vec({th[1] * x[i_index]}); };
    s.jac_h_x = [n, i_index](double, const Vector&, const Vector& th) {
      Matrix J = Matrix::Zero(1, n);
      J(0, i_index) = th[1];
      return J;
    };
    s.jac_h_theta = [i_index](double, const Vector& x, const Vector&) {
      Matrix J = Matrix::Zero(1, 4);
      J(0, 1) = x[i_index];
      return J;
    };
  }
}

std::pair<Vector, Vector> sample_sir_state(const Vector& base_theta, std::size_t n_states, double N_fallback,
                                           std::mt19937_64& rng) {
  Vector th = jitter(base_theta, rng);
  const double N = th.size() > 2 ? th[2] : N_fallback;
  Vector x = Vector::Zero(static_cast<Index>(n_states));
  x[0] = uniform(rng, 0.1, 0.8) * N;
  x[1] = uniform(rng, 0.01, 0.9) * (N - x[0]) * 0.9;
  return {x, th};
}

}  // namespace

// =============================================================================================
ZooEntry sir_classical(double beta, double gamma, double N, double k, SirOptions opt) {
  const std::string id = opt.incidence == Incidence::MassAction ? "sir-bombay" : "sir-classical";
  require_positive(id, {{"beta", beta}, {"gamma", gamma}, {"N", N}, {"k", k}});
  const Incidence law = opt.incidence;

  ZooEntry e;
  e.id = id;
  auto& s = e.spec;
  s.id = id;
  s.n_states = 2;
  s.n_params = 4;
  s.n_outputs = 1;
  s.state_names = {"S", "I"};
  s.param_names = {law == Incidence::MassAction ? "beta_tilde" : "beta", "gamma", "N", "k"};
  s.output_names = {opt.output == SirOutput::Prevalence ? "kI" : "gammaI"};
  s.state_scales = vec({N, N});
  s.param_scales = vec({std::abs(beta), gamma, N, k});

  s.f = [law](double, const Vector& x, const Vector& th) {
    const auto in = incidence(law, x[0], x[1], th);
    return vec({-in.J, in.J - th[1] * x[1]});
  };
  s.jac_f_x = [law](double, const Vector& x, const Vector& th) {
    const auto in = incidence(law, x[0], x[1], th);
    Matrix J(2, 2);
    J << -in.dS, -in.dI, in.dS, in.dI - th[1];
    return J;
  };
  s.jac_f_theta = [law](double, const Vector& x, const Vector& th) {
    const auto in = incidence(law, x[0], x[1], th);
    Matrix J = Matrix::Zero(2, 4);
    J(0, 0) = -in.db;
    J(1, 0) = in.db;
    J(1, 1) = -x[1];
    J(0, 2) = -in.dN;
    J(1, 2) = in.dN;
    return J;
  };
  sir_output_maps(s, opt.output, 1);

  e.default_params = vec({beta, gamma, N, k});
  e.default_x0 = vec({N - 1.0, 1.0});
  e.horizon = 13.0;
  e.admissible_set = "S >= 0, I >= 0, S + I <= N; all parameters > 0";
  e.notes = law == Incidence::MassAction
                ? "Kermack-McKendrick SIR with mass-action incidence b*S*I (b = beta/N) and removal-rate output "
                  "y = gamma*I (deaths per week)."
                : "Kermack-McKendrick SIR, incidence beta*S*I/N, observation y = k*I; R = N - S - I.";
  e.admissible = [](const Vector& x, const Vector& th) {
    return all_nonneg(x) && all_pos(th) && x[0] + x[1] <= th[2] * (1.0 + 1e-9);
  };
  const Vector base = e.default_params;
  e.sample = [base](std::mt19937_64& rng) { return sample_sir_state(base, 2, base[2], rng); };
  return e;
}

ZooEntry sir_cumulative(double beta, double gamma, double N, double k, Cumulative kind) {
  const std::string id = kind == Cumulative::Incidence ? "sir-cumulative" : "sir-cumulative-removed";
  require_positive(id, {{"beta", beta}, {"gamma", gamma}, {"N", N}, {"k", k}});

  ZooEntry e;
  e.id = id;
  auto& s = e.spec;
  s.id = id;
  s.n_states = 3;
  s.n_params = 4;
  s.n_outputs = 1;
  s.state_names = {"S", "I", "C"};
  s.param_names = {"beta", "gamma", "N", "k"};
  s.output_names = {"C"};
  s.state_scales = vec({N, N, N});
  s.param_scales = vec({beta, gamma, N, k});

  s.f = [kind](double, const Vector& x, const Vector& th) {
    const auto in = incidence(Incidence::Normalized, x[0], x[1], th);
    const double c = kind == Cumulative::Incidence ? th[3] * in.J : th[3] * th[1] * x[1];
    return vec({-in.J, in.J - th[1] * x[1], c});
  };
  s.jac_f_x = [kind](double, const Vector& x, const Vector& th) {
    const auto in = incidence(Incidence::Normalized, x[0], x[1], th);
    Matrix J = Matrix::Zero(3, 3);
    J(0, 0) = -in.dS;
    J(0, 1) = -in.dI;
    J(1, 0) = in.dS;
    J(1, 1) = in.dI - th[1];
    if (kind == Cumulative::Incidence) {
      J(2, 0) = th[3] * in.dS;
      J(2, 1) = th[3] * in.dI;
    } else {
      J(2, 1) = th[3] * th[1];
    }
    return J;
  };
  s.jac_f_theta = [kind](double, const Vector& x, const Vector& th) {
    const auto in = incidence(Incidence::Normalized, x[0], x[1], th);
    Matrix J = Matrix::Zero(3, 4);
    J(0, 0) = -in.db;
    J(1, 0) = in.db;
    J(1, 1) = -x[1];
    J(0, 2) = -in.dN;
    J(1, 2) = in.dN;
    if (kind == Cumulative::Incidence) {
      J(2, 0) = th[3] * in.db;
      J(2, 2) = th[3] * in.dN;
      J(2, 3) = in.J;
    } else {
      J(2, 1) = th[3] * x[1];
      J(2, 3) = th[1] * x[1];
    }
    return J;
  };
  s.h = [](double, const Vector& x, const Vector&) { return vec({x[2]}); };
  s.jac_h_x = [](double, const Vector&, const Vector&) {
    Matrix J = Matrix::Zero(1, 3);
    J(0, 2) = 1.0;
    return J;
  };
  s.jac_h_theta = [](double, const Vector&, const Vector&) { return Matrix::Zero(1, 4).eval(); };

  e.default_params = vec({beta, gamma, N, k});
  e.default_x0 = vec({N - 1.0, 1.0, 0.0});
  e.horizon = 13.0;
  e.admissible_set = "S >= 0, I >= 0, C >= 0, S + I <= N; all parameters > 0";
  e.notes = kind == Cumulative::Incidence
                ? "SIR with cumulative-incidence observation: appended state C' = k*beta*S*I/N, y = C."
                : "SIR with cumulative-removed observation: appended state C' = k*gamma*I, y = C.";
  e.admissible = [](const Vector& x, const Vector& th) {
    return all_nonneg(x) && all_pos(th) && x[0] + x[1] <= th[2] * (1.0 + 1e-9);
  };
  const Vector base = e.default_params;
  e.sample = [base](std::mt19937_64& rng) { return sample_sir_state(base, 3, base[2], rng); };
  return e;
}

ZooEntry sir_demography(double beta, double gamma, double mu, double N, double k) {
  const std::string id = "sir-demography";
  require_positive(id, {{"beta", beta}, {"gamma", gamma}, {"mu", mu}, {"N", N}, {"k", k}});

  ZooEntry e;
  e.id = id;
  auto& s = e.spec;
  s.id = id;
  s.n_states = 3;
  s.n_params = 5;
  s.n_outputs = 1;
  s.state_names = {"S", "I", "R"};
  s.param_names = {"beta", "gamma", "mu", "N", "k"};
  s.output_names = {"kI"};
  s.state_scales = vec({N, N, N});
  s.param_scales = vec({beta, gamma, mu, N, k});

  s.f = [](double, const Vector& x, const Vector& th) {
    const double b = th[0], g = th[1], mu = th[2], N = th[3];
    const double J = b * x[0] * x[1] / N;
    return vec({mu * N - J - mu * x[0], J - (g + mu) * x[1], g * x[1] - mu * x[2]});
  };
  s.jac_f_x = [](double, const Vector& x, const Vector& th) {
    const double b = th[0], g = th[1], mu = th[2], N = th[3];
    Matrix J(3, 3);
    J << -b * x[1] / N - mu, -b * x[0] / N, 0.0,  //
        b * x[1] / N, b * x[0] / N - g - mu, 0.0,   //
        0.0, g, -mu;
    return J;
  };
  s.jac_f_theta = [](double, const Vector& x, const Vector& th) {
    const double b = th[0], mu = th[2], N = th[3];
    const double SI = x[0] * x[1];
    Matrix J = Matrix::Zero(3, 5);
    J(0, 0) = -SI / N;
    J(1, 0) = SI / N;
    J(1, 1) = -x[1];
    J(2, 1) = x[1];
    J(0, 2) = N - x[0];
    J(1, 2) = -x[1];
    J(2, 2) = -x[2];
    J(0, 3) = mu + b * SI / (N * N);
    J(1, 3) = -b * SI / (N * N);
    return J;
  };
  s.h = [](double, const Vector& x, const Vector& th) { return vec({th[4] * x[1]}); };
  s.jac_h_x = [](double, const Vector&, const Vector& th) {
    Matrix J = Matrix::Zero(1, 3);
    J(0, 1) = th[4];
    return J;
  };
  s.jac_h_theta = [](double, const Vector& x, const Vector&) {
    Matrix J = Matrix::Zero(1, 5);
    J(0, 4) = x[1];
    return J;
  };

  e.default_params = vec({beta, gamma, mu, N, k});
  e.default_x0 = vec({N - 10.0, 10.0, 0.0});
  e.horizon = 100.0;
  e.admissible_set = "S, I, R >= 0; all parameters > 0 (S + I + R relaxes to N)";
  e.notes = "SIR with births and deaths at rate mu (constant population), y = k*I.";
  e.admissible = [](const Vector& x, const Vector& th) { return all_nonneg(x) && all_pos(th); };
  const Vector base = e.default_params;
  e.sample = [base](std::mt19937_64& rng) {
    Vector th = jitter(base, rng);
    const double N = th[3];
    Vector x(3);
    x[0] = uniform(rng, 0.1, 0.8) * N;
    x[1] = uniform(rng, 0.01, 0.5) * (N - x[0]);
    x[2] = N - x[0] - x[1];
    return std::pair{x, th};
  };
  return e;
}

ZooEntry sir_fluctuating(TimeSignal beta_fn, TimeSignal rho_fn, double nu, double mu, double N) {
  const std::string id = "sir-fluctuating";
  require_positive(id, {{"nu", nu}, {"mu", mu}, {"N", N}});
  if (!beta_fn || !rho_fn) throw ValidationError(id + ": beta(t) and rho(t) are required");

  ZooEntry e;
  e.id = id;
  auto& s = e.spec;
  s.id = id;
  s.n_states = 3;
  s.n_params = 3;
  s.n_outputs = 2;
  s.state_names = {"S", "I", "R"};
  s.param_names = {"nu", "mu", "N"};
  s.output_names = {"I", "rhoI"};
  s.state_scales = vec({N, N, N});
  s.param_scales = vec({nu, mu, N});

  s.f = [beta_fn, rho_fn](double t, const Vector& x, const Vector& th) {
    const double b = beta_fn(t), r = rho_fn(t), nu = th[0], mu = th[1], N = th[2];
    const double J = b * x[0] * x[1] / N;
    return vec({-J + nu * N - mu * x[0], J - r * x[1] - mu * x[1], r * x[1] - mu * x[2]});
  };
  s.jac_f_x = [beta_fn, rho_fn](double t, const Vector& x, const Vector& th) {
    const double b = beta_fn(t), r = rho_fn(t), mu = th[1], N = th[2];
    Matrix J(3, 3);
    J << -b * x[1] / N - mu, -b * x[0] / N, 0.0,  //
        b * x[1] / N, b * x[0] / N - r - mu, 0.0,   //
        0.0, r, -mu;
    return J;
  };
  s.jac_f_theta = [beta_fn](double t, const Vector& x, const Vector& th) {
    const double b = beta_fn(t), nu = th[0], N = th[2];
    const double SI = x[0] * x[1];
    Matrix J = Matrix::Zero(3, 3);
    J(0, 0) = N;
    J(0, 1) = -x[0];
    J(1, 1) = -x[1];
    J(2, 1) = -x[2];
    J(0, 2) = nu + b * SI / (N * N);
    J(1, 2) = -b * SI / (N * N);
    return J;
  };
  s.h = [rho_fn](double t, const Vector& x, const Vector&) { return vec({x[1], rho_fn(t) * x[1]}); };
  s.jac_h_x = [rho_fn](double t, const Vector&, const Vector&) {
    Matrix J = Matrix::Zero(2, 3);
    J(0, 1) = 1.0;
    J(1, 1) = rho_fn(t);
    return J;
  };
  s.jac_h_theta = [](double, const Vector&, const Vector&) { return Matrix::Zero(2, 3).eval(); };

  e.default_params = vec({nu, mu, N});
  e.default_x0 = vec({N - 10.0, 10.0, 0.0});
  e.horizon = 200.0;
  e.admissible_set = "S, I, R >= 0; nu, mu, N > 0; beta(t), rho(t) > 0";
  e.notes = "SIR with fluctuating transmission beta(t) and recovery rho(t), births nu*N and deaths mu; "
            "y = (I, rho(t)*I).";
  e.admissible = [](const Vector& x, const Vector& th) { return all_nonneg(x) && all_pos(th); };
  const Vector base = e.default_params;
  e.sample = [base](std::mt19937_64& rng) {
    Vector th = jitter(base, rng);
    th[0] = th[1];  // nu = mu keeps the population constant
    const double N = th[2];
    Vector x(3);
    x[0] = uniform(rng, 0.1, 0.8) * N;
    x[1] = uniform(rng, 0.01, 0.5) * (N - x[0]);
    x[2] = N - x[0] - x[1];
    return std::pair{x, th};
  };
  return e;
}

ZooEntry sir_fluctuating_default(std::uint64_t seed, double horizon) {
  const PiecewiseConstantSignal beta(0.4, 0.2, 1.0, horizon, seed);
  const PiecewiseConstantSignal rho(0.2, 0.2, 1.0, horizon, seed ^ 0x9E3779B97F4A7C15ULL);
  auto e = sir_fluctuating(beta, rho, 0.05, 0.05, 1000.0);
  e.horizon = horizon;
  return e;
}

// =============================================================================================
ZooEntry three_stage(double a1, double a2, double m1, double m2, double m3, TimeSignal r_bar, double k) {
  const std::string id = "three-stage";
  require_positive(id, {{"a1", a1}, {"a2", a2}, {"m1", m1}, {"m2", m2}, {"m3", m3}, {"k", k}});
  if (!r_bar) throw ValidationError(id + ": reproduction signal is required");

  ZooEntry e;
  e.id = id;
  auto& s = e.spec;
  s.id = id;
  s.n_states = 3;
  s.n_params = 6;
  s.n_outputs = 1;
  s.state_names = {"x1", "x2", "x3"};
  s.param_names = {"a1", "a2", "m1", "m2", "m3", "k"};
  s.output_names = {"x3"};
  s.state_scales = vec({1.0, 1.0, 1.0});
  s.param_scales = vec({a1, a2, m1, m2, m3, k});

  s.f = [r_bar](double t, const Vector& x, const Vector& th) {
    const double a1 = th[0], a2 = th[1], m1 = th[2], m2 = th[3], m3 = th[4], k = th[5];
    return vec({-(a1 + m1) * x[0] + r_bar(t) * x[2] / (k + x[2]), a1 * x[0] - (a2 + m2) * x[1],
                a2 * x[1] - m3 * x[2]});
  };
  s.jac_f_x = [r_bar](double t, const Vector& x, const Vector& th) {
    const double a1 = th[0], a2 = th[1], m1 = th[2], m2 = th[3], m3 = th[4], k = th[5];
    const double d = k + x[2];
    Matrix J(3, 3);
    J << -(a1 + m1), 0.0, r_bar(t) * k / (d * d),  //
        a1, -(a2 + m2), 0.0,                        //
        0.0, a2, -m3;
    return J;
  };
  s.jac_f_theta = [r_bar](double t, const Vector& x, const Vector& th) {
    const double d = th[5] + x[2];
    Matrix J = Matrix::Zero(3, 6);
    J(0, 0) = -x[0];
    J(1, 0) = x[0];
    J(1, 1) = -x[1];
    J(2, 1) = x[1];
    J(0, 2) = -x[0];
    J(1, 3) = -x[1];
    J(2, 4) = -x[2];
    J(0, 5) = -r_bar(t) * x[2] / (d * d);
    return J;
  };
  s.h = [](double, const Vector& x, const Vector&) { return vec({x[2]}); };
  s.jac_h_x = [](double, const Vector&, const Vector&) {
    Matrix J = Matrix::Zero(1, 3);
    J(0, 2) = 1.0;
    return J;
  };
  s.jac_h_theta = [](double, const Vector&, const Vector&) { return Matrix::Zero(1, 6).eval(); };

  e.default_params = vec({a1, a2, m1, m2, m3, k});
  e.default_x0 = vec({6.0, 4.0, 5.0});
  e.horizon = 200.0;
  e.admissible_set = "x1, x2, x3 >= 0; all parameters > 0";
  e.notes = "Three-stage (young, subadult, adult) population; only adults reproduce with "
            "r(t, x3) = rbar(t)*x3/(k + x3); y = x3.";
  e.admissible = [](const Vector& x, const Vector& th) { return all_nonneg(x) && all_pos(th); };
  const Vector base = e.default_params;
  e.sample = [base](std::mt19937_64& rng) {
    Vector th = jitter(base, rng);
    Vector x(3);
    for (Index i = 0; i < 3; ++i) x[i] = uniform(rng, 0.0, 10.0);
    return std::pair{x, th};
  };

  Matrix A(3, 3);
  A << -(a1 + m1), 0.0, 0.0, a1, -(a2 + m2), 0.0, 0.0, a2, -m3;
  Matrix C = Matrix::Zero(1, 3);
  C(0, 2) = 1.0;
  e.linear_form = LinearUpToOutput{A, C, [r_bar, k](double t, const Vector& y) {
                                     return vec({r_bar(t) * y[0] / (k + y[0]), 0.0, 0.0});
                                   }};
  return e;
}

// =============================================================================================
std::pair<Matrix, Matrix> five_class_matrices(double alpha, double beta, double m1, double m2, std::size_t channel) {
  if (channel < 1 || channel > 5) throw ValidationError("five-class-age: output channel must be 1..5");
  Matrix A = Matrix::Zero(5, 5);
  A(0, 0) = -alpha;
  A(0, 3) = beta;
  A(1, 0) = alpha / 2.0;
  A(1, 1) = -alpha - m1;
  A(2, 0) = alpha / 2.0;
  A(2, 2) = -alpha - m1;
  A(3, 1) = alpha;
  A(3, 3) = -m2;
  A(4, 2) = alpha;
  A(4, 4) = -m2;
  Matrix C = Matrix::Zero(1, 5);
  C(0, static_cast<Index>(channel - 1)) = 1.0;
  return {A, C};
}

ZooEntry five_class_age(double alpha, double beta, double m1, double m2, std::size_t channel) {
  const std::string id = "five-class-age";
  require_positive(id, {{"alpha", alpha}, {"beta", beta}, {"m1", m1}, {"m2", m2}});
  const auto [A0, C0] = five_class_matrices(alpha, beta, m1, m2, channel);
  const auto c = static_cast<Index>(channel - 1);

  ZooEntry e;
  e.id = id;
  auto& s = e.spec;
  s.id = id;
  s.n_states = 5;
  s.n_params = 4;
  s.n_outputs = 1;
  s.state_names = {"x1", "x2", "x3", "x4", "x5"};
  s.param_names = {"alpha", "beta", "m1", "m2"};
  s.output_names = {"x" + std::to_string(channel)};
  s.state_scales = Vector::Ones(5);
  s.param_scales = vec({alpha, beta, m1, m2});

  auto matrix_of = [channel](const Vector& th) { return five_class_matrices(th[0], th[1], th[2], th[3], channel).first; };
  s.f = [matrix_of](double, const Vector& x, const Vector& th) { return Vector(matrix_of(th) * x); };
  s.jac_f_x = [matrix_of](double, const Vector&, const Vector& th) { return matrix_of(th); };
  s.jac_f_theta = [](double, const Vector& x, const Vector&) {
    Matrix J = Matrix::Zero(5, 4);
    J.col(0) << -x[0], x[0] / 2.0 - x[1], x[0] / 2.0 - x[2], x[1], x[2];
    J(0, 1) = x[3];
    J(1, 2) = -x[1];
    J(2, 2) = -x[2];
    J(3, 3) = -x[3];
    J(4, 3) = -x[4];
    return J;
  };
  s.h = [c](double, const Vector& x, const Vector&) { return vec({x[c]}); };
  s.jac_h_x = [C0 = C0](double, const Vector&, const Vector&) { return C0; };
  s.jac_h_theta = [](double, const Vector&, const Vector&) { return Matrix::Zero(1, 4).eval(); };

  e.default_params = vec({alpha, beta, m1, m2});
  e.default_x0 = vec({10.0, 5.0, 5.0, 3.0, 3.0});
  e.horizon = 50.0;
  e.admissible_set = "x >= 0 componentwise; all parameters > 0";
  e.notes = "Linear population model in five age classes; only x4 adults reproduce; the output channel selects "
            "the single measured class.";
  e.admissible = [](const Vector& x, const Vector& th) { return all_nonneg(x) && all_pos(th); };
  const Vector base = e.default_params;
  e.sample = [base](std::mt19937_64& rng) {
    Vector th = jitter(base, rng);
    Vector x(5);
    for (Index i = 0; i < 5; ++i) x[i] = uniform(rng, 0.0, 10.0);
    return std::pair{x, th};
  };
  e.linear_form = LinearUpToOutput{A0, C0, [](double, const Vector&) { return Vector::Zero(5).eval(); }};
  return e;
}

// =============================================================================================
namespace {
constexpr Index kMalLambda = 0, kMalMuS = 1, kMalMu = 2, kMalGamma = 7, kMalR = 12, kMalMuM = 13, kMalBeta = 14;
}

Vector malaria_default_params() {
  Vector th(15);
  th[kMalLambda] = 4.15e4;  // RBC recruitment, cells/µL/day
  th[kMalMuS] = 1.0 / 120.0;
  // Five stages of a 48 h cycle (mean transit 2.5/day); distinct rates keep Ā diagonalizable.
  const double stage_factor[5] = {0.9, 1.0, 1.1, 0.95, 1.05};
  for (Index i = 0; i < 5; ++i) {
    th[kMalMu + i] = 1.0 / 120.0;
    th[kMalGamma + i] = 2.5 * stage_factor[i];
  }
  th[kMalR] = 16.0;
  th[kMalMuM] = 48.0;
  th[kMalBeta] = 2e-6;
  return th;
}

MalariaMatrices malaria_matrices(const Vector& th) {
  if (th.size() != 15) throw ValidationError("malaria: expected 15 parameters");
  MalariaMatrices mm;
  mm.A = Matrix::Zero(7, 7);
  mm.A(0, 0) = -th[kMalMuS];
  for (Index i = 0; i < 5; ++i) {
    mm.A(1 + i, 1 + i) = -th[kMalGamma + i] - th[kMalMu + i];
    if (i > 0) mm.A(1 + i, i) = th[kMalGamma + i - 1];
  }
  mm.A(6, 5) = th[kMalR] * th[kMalGamma + 4];
  mm.A(6, 6) = -th[kMalMuM];
  mm.E = Vector::Zero(7);
  mm.E << -1, 1, 0, 0, 0, 0, -1;
  mm.e1 = Vector::Zero(7);
  mm.e1[0] = 1.0;
  mm.C = Matrix::Zero(1, 7);
  mm.C(0, 1) = 1.0;
  mm.C(0, 2) = 1.0;
  mm.Lambda = th[kMalLambda];
  mm.A_bar = mm.A - mm.E * (mm.C * mm.A);
  return mm;
}

ZooEntry malaria_intrahost(const Vector& theta) {
  const std::string id = "malaria";
  if (theta.size() != 15) throw ValidationError(id + ": expected 15 parameters");
  if (!all_pos(theta)) throw ValidationError(id + ": all parameters must be positive and finite");

  ZooEntry e;
  e.id = id;
  auto& s = e.spec;
  s.id = id;
  s.n_states = 7;
  s.n_params = 15;
  s.n_outputs = 1;
  s.state_names = {"S", "I1", "I2", "I3", "I4", "I5", "M"};
  s.param_names = {"Lambda", "mu_S", "mu_1", "mu_2",    "mu_3",    "mu_4", "mu_5", "gamma_1",
                   "gamma_2", "gamma_3", "gamma_4", "gamma_5", "r", "mu_M", "beta"};
  s.output_names = {"I1+I2"};
  const double S_star = theta[kMalLambda] / theta[kMalMuS];
  s.state_scales = Vector::Constant(7, S_star * 1e-3);
  s.state_scales[0] = S_star;
  s.param_scales = theta.cwiseAbs();

  s.f = [](double, const Vector& x, const Vector& th) {
    const auto mm = malaria_matrices(th);
    return Vector(mm.A * x + th[kMalBeta] * x[0] * x[6] * mm.E + mm.Lambda * mm.e1);
  };
  s.jac_f_x = [](double, const Vector& x, const Vector& th) {
    const auto mm = malaria_matrices(th);
    Matrix J = mm.A;
    J.col(0) += th[kMalBeta] * x[6] * mm.E;
    J.col(6) += th[kMalBeta] * x[0] * mm.E;
    return J;
  };
  s.jac_f_theta = [](double, const Vector& x, const Vector& th) {
    Matrix J = Matrix::Zero(7, 15);
    J(0, kMalLambda) = 1.0;
    J(0, kMalMuS) = -x[0];
    for (Index i = 0; i < 5; ++i) {
      J(1 + i, kMalMu + i) = -x[1 + i];
      J(1 + i, kMalGamma + i) = -x[1 + i];
      if (i < 4) J(2 + i, kMalGamma + i) = x[1 + i];
    }
    J(6, kMalGamma + 4) = th[kMalR] * x[5];
    J(6, kMalR) = th[kMalGamma + 4] * x[5];
    J(6, kMalMuM) = -x[6];
    Vector E(7);
    E << -1, 1, 0, 0, 0, 0, -1;
    J.col(kMalBeta) = x[0] * x[6] * E;
    return J;
  };
  s.h = [](double, const Vector& x, const Vector&) { return vec({x[1] + x[2]}); };
  s.jac_h_x = [](double, const Vector&, const Vector&) {
    Matrix J = Matrix::Zero(1, 7);
    J(0, 1) = 1.0;
    J(0, 2) = 1.0;
    return J;
  };
  s.jac_h_theta = [](double, const Vector&, const Vector&) { return Matrix::Zero(1, 15).eval(); };

  e.default_params = theta;
  e.default_x0 = Vector::Zero(7);
  e.default_x0[0] = S_star;
  e.default_x0[6] = 1e4;
  e.horizon = 200.0;
  e.admissible_set = "all concentrations >= 0; all parameters > 0";
  e.notes = "Intra-host malaria: uninfected erythrocytes S, five infected age classes I1..I5, free merozoites M; "
            "only circulating parasitized cells I1 + I2 are measured.";
  e.admissible = [](const Vector& x, const Vector& th) { return all_nonneg(x) && all_pos(th); };
  const Vector base = theta;
  e.sample = [base, S_star](std::mt19937_64& rng) {
    Vector th = jitter(base, rng);
    Vector x(7);
    x[0] = uniform(rng, 0.2, 1.0) * S_star;
    for (Index i = 1; i < 7; ++i) x[i] = uniform(rng, 0.0, 1e-2) * S_star;
    return std::pair{x, th};
  };
  return e;
}

// =============================================================================================
ZooEntry two_compartment(double a12, double a21) {
  const std::string id = "two-compartment";
  require_positive(id, {{"a12", a12}, {"a21", a21}});

  ZooEntry e;
  e.id = id;
  auto& s = e.spec;
  s.id = id;
  s.n_states = 2;
  s.n_params = 2;
  s.n_outputs = 1;
  s.state_names = {"x1", "x2"};
  s.param_names = {"a12", "a21"};
  s.output_names = {"x1"};
  s.state_scales = vec({1.0, 1.0});
  s.param_scales = vec({a12, a21});

  s.f = [](double, const Vector& x, const Vector& th) { return vec({-th[1] * x[0] + th[0] * x[1], -th[0] * x[1]}); };
  s.jac_f_x = [](double, const Vector&, const Vector& th) {
    Matrix J(2, 2);
    J << -th[1], th[0], 0.0, -th[0];
    return J;
  };
  s.jac_f_theta = [](double, const Vector& x, const Vector&) {
    Matrix J(2, 2);
    J << x[1], -x[0], -x[1], 0.0;
    return J;
  };
  s.h = [](double, const Vector& x, const Vector&) { return vec({x[0]}); };
  s.jac_h_x = [](double, const Vector&, const Vector&) {
    Matrix J(1, 2);
    J << 1.0, 0.0;
    return J;
  };
  s.jac_h_theta = [](double, const Vector&, const Vector&) { return Matrix::Zero(1, 2).eval(); };

  e.default_params = vec({a12, a21});
  e.default_x0 = vec({1.0, 0.0});
  e.horizon = 30.0;
  e.admissible_set = "x1, x2 >= 0; a12, a21 > 0";
  e.notes = "Two-compartment exchange model, y = x1; with x2(0) = 0 the output depends on a21 only.";
  e.admissible = [](const Vector& x, const Vector& th) { return all_nonneg(x) && all_pos(th); };
  const Vector base = e.default_params;
  e.sample = [base](std::mt19937_64& rng) {
    Vector th = jitter(base, rng);
    return std::pair{vec({uniform(rng, 0.1, 2.0), uniform(rng, 0.1, 2.0)}), th};
  };
  return e;
}

ZooEntry academic_unobservable(double alpha) {
  const std::string id = "academic";
  require_positive(id, {{"alpha", alpha}});

  ZooEntry e;
  e.id = id;
  auto& s = e.spec;
  s.id = id;
  s.n_states = 2;
  s.n_params = 1;
  s.n_outputs = 1;
  s.state_names = {"x1", "x2"};
  s.param_names = {"alpha"};
  s.output_names = {"y"};
  s.state_scales = vec({1.0, 1.0});
  s.param_scales = vec({alpha});

  s.f = [](double, const Vector& x, const Vector& th) {
    return vec({-th[0] * (x[0] + x[1]), th[0] * (x[0] - x[1])});
  };
  s.jac_f_x = [](double, const Vector&, const Vector& th) {
    Matrix J(2, 2);
    J << -th[0], -th[0], th[0], -th[0];
    return J;
  };
  s.jac_f_theta = [](double, const Vector& x, const Vector&) {
    Matrix J(2, 1);
    J << -(x[0] + x[1]), x[0] - x[1];
    return J;
  };
  s.h = [](double, const Vector& x, const Vector&) { return vec({0.5 * x.squaredNorm()}); };
  s.jac_h_x = [](double, const Vector& x, const Vector&) { return Matrix(x.transpose()); };
  s.jac_h_theta = [](double, const Vector&, const Vector&) { return Matrix::Zero(1, 1).eval(); };

  e.default_params = vec({alpha});
  e.default_x0 = vec({1.0, 0.5});
  e.horizon = 10.0;
  e.admissible_set = "R^2 minus the origin; alpha > 0";
  e.notes = "Rotation-decay system observed through y = (x1^2 + x2^2)/2: alpha identifiable, state not observable.";
  e.admissible = [](const Vector& x, const Vector& th) { return x.norm() > 0.0 && all_pos(th); };
  const Vector base = e.default_params;
  e.sample = [base](std::mt19937_64& rng) {
    Vector th = jitter(base, rng);
    return std::pair{vec({uniform(rng, -2.0, 2.0), uniform(rng, 0.1, 2.0)}), th};
  };
  return e;
}

// =============================================================================================
std::vector<std::string> zoo_ids() {
  return {"sir-classical", "sir-bombay",   "sir-cumulative", "sir-cumulative-removed", "sir-demography",
          "sir-fluctuating", "three-stage", "five-class-age", "malaria",                "two-compartment",
          "academic"};
}

ZooEntry zoo_by_id(const std::string& id, std::uint64_t seed) {
  if (id == "sir-classical") return sir_classical(1.9605032, 0.4751562, 763.0, 1.0);
  if (id == "sir-bombay") {
    auto e = sir_classical(8.5524088e-5, 3.7161743, 48114.5513612, 1.0,
                           {Incidence::MassAction, SirOutput::RemovalRate});
    e.default_x0 = vec({48113.13, 1.4213612});
    e.horizon = 30.0;
    return e;
  }
  if (id == "sir-cumulative") return sir_cumulative(1.9605032, 0.4751562, 763.0, 1.0);
  if (id == "sir-cumulative-removed") {
    auto e = sir_cumulative(0.4, 0.1, 10000.0, 1.0, Cumulative::Removed);
    e.default_x0 = vec({9990.0, 10.0, 0.0});
    e.horizon = 100.0;
    return e;
  }
  if (id == "sir-demography") return sir_demography(0.5, 0.1, 0.02, 1000.0);
  if (id == "sir-fluctuating") return sir_fluctuating_default(seed);
  if (id == "three-stage") return three_stage(0.1, 0.1, 0.05, 0.07, 0.07, seasonal_signal(1.0, 0.1, 10.0));
  if (id == "five-class-age") return five_class_age(0.5, 2.0, 0.1, 0.2, 5);
  if (id == "malaria") return malaria_intrahost(malaria_default_params());
  if (id == "two-compartment") return two_compartment(0.3, 0.2);
  if (id == "academic") return academic_unobservable(0.5);
  throw UsageError("unknown model id '" + id + "'");
}

ZooEntry with_params(const ZooEntry& entry, const Vector& theta, std::uint64_t) {
  if (static_cast<std::size_t>(theta.size()) != entry.spec.n_params) {
    throw ValidationError(entry.id + ": expected " + std::to_string(entry.spec.n_params) + " parameters");
  }
  if (!all_pos(theta)) throw ValidationError(entry.id + ": parameters must be positive and finite");
  ZooEntry e = entry;
  e.default_params = theta;
  if (e.id == "three-stage") {
    // The linear part depends on θ.
    const auto& lf = *entry.linear_form;
    Matrix A(3, 3);
    A << -(theta[0] + theta[2]), 0.0, 0.0, theta[0], -(theta[1] + theta[3]), 0.0, 0.0, theta[1], -theta[4];
    const double k = theta[5];
    const auto phi = lf.phi;
    const double k_old = entry.default_params[5];
    e.linear_form = LinearUpToOutput{A, lf.C, [phi, k, k_old](double t, const Vector& y) {
                                       // Φ1 = rbar(t)·y/(k+y): rescale from the stored k.
                                       Vector v = phi(t, y);
                                       v[0] *= (k_old + y[0]) / (k + y[0]);
                                       return v;
                                     }};
  } else if (e.id == "five-class-age") {
    const auto C = entry.linear_form->C;
    std::size_t ch = 1;
    for (Index i = 0; i < C.cols(); ++i) {
      if (C(0, i) != 0.0) ch = static_cast<std::size_t>(i + 1);
    }
    e.linear_form->A = five_class_matrices(theta[0], theta[1], theta[2], theta[3], ch).first;
  }
  return e;
}

}  // namespace epiobs
