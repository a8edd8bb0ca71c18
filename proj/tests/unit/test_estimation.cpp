#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>
#include <Eigen/Eigenvalues>

#include "epiobs/error.hpp"
#include "epiobs/estimation/estimation.hpp"
#include "epiobs/zoo/zoo.hpp"

using namespace epiobs;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

const std::vector<double> kBoardingCases{1, 6, 26, 73, 222, 293, 258, 237, 191, 124, 68, 26, 10, 3};
const std::vector<double> kBombayDeaths{8,   10,  12,  16,  24,  48,  51,  92,  124, 178, 280,
                                        387, 442, 644, 779, 702, 695, 870, 925, 802, 578, 404,
                                        296, 162, 106, 64,  46,  35,  27,  28,  24};

std::vector<double> days(std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i);
  return t;
}

FitProblem boarding_problem() {
  const auto e = zoo_by_id("sir-classical");
  return {e.spec, vec({2.0, 0.5, 763.0, 1.0}), vec({762.0, 1.0}), {{0, 1}, {}}, {}, {}};
}

Dataset boarding_data() { return make_dataset("boarding-school", days(14), kBoardingCases); }

FitProblem bombay_problem() {
  const auto e = zoo_by_id("sir-bombay");
  return {e.spec, vec({8e-5, 0.6, 1.0, 1.0}), vec({15000.0, 7.0}), {{0, 1}, {0, 1}}, {}, {}};
}

Dataset bombay_data() {
  return make_dataset("bombay", days(31), kBombayDeaths, 0, DofConvention::EstimatedX0);
}

// Re-integration central differences of x(t) w.r.t. θ_j (param) or x0_j (state).
Matrix fd_column_series(const ZooEntry& e, const std::vector<double>& grid, std::size_t j, bool state) {
  Vector th = e.default_params;
  Vector x0 = e.default_x0;
  Vector& v = state ? x0 : th;
  const double base = v[static_cast<Eigen::Index>(j)];
  const double scale = state ? e.spec.state_scale_vector()[static_cast<Eigen::Index>(j)]
                             : e.spec.param_scale_vector()[static_cast<Eigen::Index>(j)];
  const double h = 1e-5 * (base != 0.0 ? std::abs(base) : scale);
  const IntegratorOptions opt{1e-12, 1e-14};
  v[static_cast<Eigen::Index>(j)] = base + h;
  const auto plus = integrate(e.spec, x0, th, grid, opt);
  v[static_cast<Eigen::Index>(j)] = base - h;
  const auto minus = integrate(e.spec, x0, th, grid, opt);
  Matrix out(static_cast<Eigen::Index>(e.spec.n_states), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = (plus.x[i] - minus.x[i]) / (2.0 * h);
  return out;
}

}  // namespace

TEST_SUITE("sensitivity") {
  TEST_CASE("initial sensitivities are z = 0 and w = Id") {
    for (const auto& id : zoo_ids()) {
      const auto e = zoo_by_id(id);
      const auto b = sensitivity_solve(e.spec, e.default_params, e.default_x0, {0.0, 1.0});
      CHECK(b.z.front().isZero(0.0));
      CHECK(b.w.front().isIdentity(0.0));
    }
  }

  TEST_CASE("z and w match re-integration finite differences on every zoo model") {
    for (const auto& id : zoo_ids()) {
      CAPTURE(id);
      const auto e = zoo_by_id(id);
      const double T = std::min(e.horizon > 0.0 ? e.horizon : 10.0, 30.0);
      const auto grid = uniform_grid(0.0, T, 10);
      const auto b = sensitivity_solve(e.spec, e.default_params, e.default_x0, grid, {1e-12, 1e-14});
      const auto check = [&](std::size_t j, bool state) {
        CAPTURE(j);
        CAPTURE(state);
        const Matrix fd = fd_column_series(e, grid, j, state);
        Matrix an(fd.rows(), fd.cols());
        for (std::size_t i = 0; i < grid.size(); ++i)
          an.col(static_cast<Eigen::Index>(i)) =
              state ? b.w[i].col(static_cast<Eigen::Index>(j)) : b.z[i].col(static_cast<Eigen::Index>(j));
        const double mag = std::max(an.cwiseAbs().maxCoeff(), 1e-12);
        CHECK((fd - an).cwiseAbs().maxCoeff() <= 1e-4 * mag);
      };
      for (std::size_t j = 0; j < e.spec.n_params; ++j) check(j, false);
      for (std::size_t j = 0; j < e.spec.n_states; ++j) check(j, true);
    }
  }

  TEST_CASE("Liouville identity det w = exp(int tr A) on SIR") {
    const auto e = zoo_by_id("sir-classical");
    const auto grid = uniform_grid(0.0, 14.0, 28);
    const auto b = sensitivity_solve(e.spec, e.default_params, vec({762.0, 1.0}), grid);
    // Integrate the state together with ∫ tr A.
    const OdeRhs rhs = [&](double t, const Vector& X) {
      const Vector x = X.head(2);
      Vector d(3);
      d.head(2) = e.spec.f(t, x, e.default_params);
      d[2] = dfdx(e.spec, t, x, e.default_params).trace();
      return d;
    };
    const auto tr = solve_ode(rhs, vec({762.0, 1.0, 0.0}), grid, {1e-12, 1e-14});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double det = b.w[i].determinant();
      CHECK(det > 0.0);
      CHECK(rel(det, std::exp(tr.x[i][2])) <= 1e-5);
    }
  }

  TEST_CASE("boarding-school output sensitivity is the I row of z") {
    const auto p = boarding_problem();
    const Vector th = vec({1.9605032, 0.4751562, 763.0, 1.0});
    const auto grid = uniform_grid(0.0, 13.0, 13);
    const auto b = sensitivity_solve(p.model, th, p.x0, grid);
    const auto chi = output_sensitivity(b, p.model, th, p.free);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      REQUIRE(chi[i].rows() == 1);
      REQUIRE(chi[i].cols() == 2);
      CHECK(chi[i](0, 0) == b.z[i](1, 0));
      CHECK(chi[i](0, 1) == b.z[i](1, 1));
    }
  }

  TEST_CASE("Bombay output sensitivity matches finite differences of y, including the +I term") {
    const auto p = bombay_problem();
    const Vector th = vec({8.5524088e-5, 3.7161743, 1.0, 1.0});
    const Vector x0 = vec({48113.13, 1.4213612});
    const auto grid = uniform_grid(0.0, 30.0, 30);
    const auto b = sensitivity_solve(p.model, th, x0, grid, {1e-12, 1e-14});
    const auto chi = output_sensitivity(b, p.model, th, p.free);
    const IntegratorOptions fine{1e-12, 1e-14};
    const auto y_at = [&](const Vector& t2, const Vector& x2) { return integrate(p.model, x2, t2, grid, fine).y; };
    const Vector base(vec({th[0], th[1], x0[0], x0[1]}));
    for (Eigen::Index j = 0; j < 4; ++j) {
      CAPTURE(j);
      const double h = 1e-5 * std::abs(base[j]);
      Vector tp = th, tm = th, xp = x0, xm = x0;
      if (j < 2) {
        tp[j] += h;
        tm[j] -= h;
      } else {
        xp[j - 2] += h;
        xm[j - 2] -= h;
      }
      const auto yp = y_at(tp, xp);
      const auto ym = y_at(tm, xm);
      double mag = 0.0, err = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double fd = (yp[i][0] - ym[i][0]) / (2.0 * h);
        mag = std::max(mag, std::abs(chi[i](0, j)));
        err = std::max(err, std::abs(fd - chi[i](0, j)));
      }
      CHECK(err <= 1e-5 * mag);
    }
    // The γ column differs from γ·∂I/∂γ by exactly I.
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(chi[i](0, 1) == doctest::Approx(th[1] * b.z[i](1, 1) + b.x[i][1]).epsilon(1e-12));
  }

  TEST_CASE("constant output gives zero sensitivity columns") {
    auto e = zoo_by_id("two-compartment");
    e.spec.h = [](double, const Vector&, const Vector&) { return vec({3.0}); };
    e.spec.jac_h_x = [](double, const Vector&, const Vector&) { return Matrix(Matrix::Zero(1, 2)); };
    e.spec.jac_h_theta = [](double, const Vector&, const Vector&) { return Matrix(Matrix::Zero(1, 2)); };
    const auto b = sensitivity_solve(e.spec, e.default_params, e.default_x0, uniform_grid(0.0, 5.0, 5));
    ParameterSelection all{{0, 1}, {0, 1}};
    for (const auto& c : output_sensitivity(b, e.spec, e.default_params, all)) CHECK(c.isZero(0.0));
  }
}

TEST_SUITE("statistics") {
  TEST_CASE("t quantiles") {
    CHECK(std::abs(t_quantile(12) - 2.1788128) <= 1e-4);
    CHECK(std::abs(t_quantile(25) - 2.0595386) <= 1e-4);
    CHECK(std::abs(t_quantile(1e6) - 1.959964) <= 1e-3);
    for (double dof : {1.0, 2.0, 3.5, 7.0, 30.0, 200.0}) {
      CAPTURE(dof);
      const boost::math::students_t dist(dof);
      for (double p : {0.6, 0.9, 0.975, 0.995}) {
        CAPTURE(p);
        CHECK(std::abs(t_quantile(dof, p) - boost::math::quantile(dist, p)) <= 1e-9);
        CHECK(std::abs(t_cdf(t_quantile(dof, p), dof) - p) <= 1e-12);
      }
    }
    CHECK(t_quantile(5, 0.025) == doctest::Approx(-t_quantile(5, 0.975)));
    CHECK_THROWS_AS((void)t_quantile(0.5), ValidationError);
  }

  TEST_CASE("incomplete beta edge values") {
    CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
    // I_x(1, 1) = x; I_x(a, 1) = x^a.
    CHECK(incomplete_beta(1.0, 1.0, 0.3) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(incomplete_beta(2.5, 1.0, 0.4) == doctest::Approx(std::pow(0.4, 2.5)).epsilon(1e-13));
  }

  TEST_CASE("single-sample FIM") {
    Matrix c(1, 2);
    c << 1.0, 0.0;
    const auto r = fim({c}, 1.0);
    CHECK(r.fim.isApprox((Matrix(2, 2) << 1, 0, 0, 0).finished()));
    CHECK(std::isinf(r.condition_number));
    CHECK(r.ill_conditioned);
    CHECK(r.pseudo_inverse);
    CHECK_THROWS_AS((void)fim({c}, 0.0), ValidationError);
  }

  TEST_CASE("diagonal FIM gives half-widths 1.96 sigma for large dof") {
    const double sigma = 0.7;
    std::vector<Matrix> chi{Matrix::Identity(3, 3)};
    auto r = fim(chi, sigma * sigma);
    FitResult f;
    f.estimate = vec({1.0, 2.0, 3.0});
    f.dof = 1e6;
    r = confidence_intervals(f, r);
    CHECK(r.fim.isApprox(Matrix::Identity(3, 3) / (sigma * sigma)));
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(r.half_widths[k] == doctest::Approx(1.959964 * sigma).epsilon(1e-4));
    CHECK(r.intervals[1].first == doctest::Approx(2.0 - r.half_widths[1]));
  }

  TEST_CASE("negative covariance diagonal is an error") {
    FimReport r;
    r.covariance = (Matrix(2, 2) << 1.0, 0.0, 0.0, -1e-9).finished();
    FitResult f;
    f.estimate = vec({1.0, 1.0});
    f.dof = 10;
    CHECK_THROWS_AS((void)confidence_intervals(f, r), Error);
  }
}

TEST_SUITE("fitting") {
  TEST_CASE("boarding school fit, FIM and intervals") {
    const auto p = boarding_problem();
    const auto d = boarding_data();
    const auto fit = ols_fit(p, d);
    CAPTURE(fit.stop_reason);
    CHECK(fit.converged);
    CHECK(rel(fit.estimate[0], 1.9605032) <= 5e-3);
    CHECK(rel(fit.estimate[1], 0.4751562) <= 5e-3);
    CHECK(rel(fit.sse, 4892.6472) <= 5e-3);
    CHECK(rel(fit.sigma2_hat, 407.72060) <= 5e-3);
    CHECK(fit.dof == 12.0);
    CHECK(fit.theta_hat[2] == 763.0);

    const auto r = fim_at_fit(p, d, fit);
    CHECK(rel(r.fim(0, 0), 974.5073) <= 5e-3);
    CHECK(rel(r.fim(0, 1), -523.73985) <= 5e-3);
    CHECK(rel(r.fim(1, 0), -523.73985) <= 5e-3);
    CHECK(rel(r.fim(1, 1), 3132.2047) <= 5e-3);
    CHECK(rel(r.condition_number, 3.8082403) <= 1e-2);
    CHECK(std::abs(r.t_quantile - 2.1788128) <= 1e-4);
    CHECK(rel(r.half_widths[0], 0.0731602) <= 1e-2);
    CHECK(rel(r.half_widths[1], 0.0408077) <= 1e-2);
    CHECK_FALSE(r.ill_conditioned);
    CHECK(r.condition_number < 10.0);
    for (Eigen::Index k = 0; k < 2; ++k) CHECK(r.half_widths[k] / std::abs(fit.estimate[k]) < 0.1);

    // Gradient vanishes at the optimum.
    const auto grid = d.t;
    const auto b = sensitivity_solve(p.model, fit.theta_hat, fit.x0_hat, grid);
    const Matrix chi = stack_rows(output_sensitivity(b, p.model, fit.theta_hat, p.free));
    CHECK((chi.transpose() * fit.residuals).norm() <= 1e-6 * d.y.norm());
  }

  TEST_CASE("Bombay fit reaches the paper's SSE on an ill-conditioned ridge") {
    const auto p = bombay_problem();
    const auto d = bombay_data();
    const auto fit = ols_fit(p, d);
    CAPTURE(fit.stop_reason);
    CAPTURE(fit.estimate.transpose());
    CHECK(fit.sse <= 1.01 * 106336.49);
    CHECK(fit.dof == 25.0);
    const auto r = fim_at_fit(p, d, fit);
    CHECK(r.ill_conditioned);
    CHECK(r.condition_number >= 1e20);
    CHECK(std::abs(r.t_quantile - 2.0595386) <= 1e-4);
    for (Eigen::Index k : {1, 2, 3}) {
      CAPTURE(k);
      CHECK(r.half_widths[k] / std::abs(fit.estimate[k]) > 5.0);
    }
  }

  TEST_CASE("Bombay FIM at the reported optimum") {
    const auto p = bombay_problem();
    const auto d = bombay_data();
    FitResult f;
    f.theta_hat = vec({8.552408800e-05, 3.7161743, 1.0, 1.0});
    f.x0_hat = vec({48113.13, 1.4213612});
    f.estimate = vec({f.theta_hat[0], f.theta_hat[1], f.x0_hat[0], f.x0_hat[1]});
    f.sse = fit_residuals(p.model, f.theta_hat, f.x0_hat, d).squaredNorm();
    CHECK(rel(f.sse, 106336.49) <= 1e-2);
    f.dof = residual_dof(d, 2, 4);
    f.sigma2_hat = f.sse / f.dof;
    const auto r = fim_at_fit(p, d, f);
    CHECK(r.ill_conditioned);
    CHECK(r.condition_number >= 1e20);
    CHECK(rel(r.half_widths[1], 25.255243) <= 5e-2);
    for (Eigen::Index k : {1, 2, 3}) CHECK(r.half_widths[k] / std::abs(f.estimate[k]) > 5.0);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(r.fim);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * es.eigenvalues().maxCoeff());
    CHECK((r.fim - r.fim.transpose()).norm() <= 1e-10 * r.fim.norm());
  }

  TEST_CASE("zero-noise closure on sir-classical and sir-cumulative") {
    for (const char* id : {"sir-classical", "sir-cumulative"}) {
      CAPTURE(id);
      const auto e = zoo_by_id(id);
      const auto grid = uniform_grid(0.0, 14.0, 28);
      const auto traj = integrate(e.spec, e.default_x0, e.default_params, grid, sensitivity_integrator());
      std::vector<double> y;
      for (const auto& v : traj.y) y.push_back(v[0]);
      const auto d = make_dataset(id, grid, y);
      for (double perturb : {1.0, 1.1}) {
        CAPTURE(perturb);
        FitProblem p{e.spec, e.default_params, e.default_x0, {{0, 1}, {}}, {}, {}};
        p.theta[0] *= perturb;
        p.theta[1] /= perturb;
        const auto fit = ols_fit(p, d);
        CAPTURE(fit.stop_reason);
        CAPTURE(fit.sse);
        CAPTURE(fit.iterations);
        CHECK(fit.converged);
        CHECK(fit.sse <= 1e-6);
        CHECK(rel(fit.theta_hat[0], e.default_params[0]) <= 1e-6);
        CHECK(rel(fit.theta_hat[1], e.default_params[1]) <= 1e-6);
      }
    }
  }

  TEST_CASE("iteration budget exhaustion reports non-convergence") {
    FitOptions o;
    o.max_iterations = 1;
    const auto fit = ols_fit(bombay_problem(), bombay_data(), o);
    CHECK_FALSE(fit.converged);
    CHECK(fit.iterations == 1);
    CHECK(fit.sse >= 0.0);
  }

  TEST_CASE("validation") {
    auto p = boarding_problem();
    p.theta[0] = -1.0;
    CHECK_THROWS_AS((void)ols_fit(p, boarding_data()), ValidationError);
    CHECK_THROWS_AS((void)make_dataset("x", {0.0, 2.0, 1.0}, {1.0, 2.0, 3.0}), ValidationError);
    CHECK_THROWS_AS((void)make_dataset("x", {0.0, 1.0}, {1.0, NAN}), ValidationError);
    CHECK_THROWS_AS((void)parse_dof_convention("both"), UsageError);
    CHECK(parse_dof_convention(to_string(DofConvention::EstimatedX0)) == DofConvention::EstimatedX0);
  }
}
