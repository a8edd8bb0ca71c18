#include <cmath>
#include <random>

#include "doctest.h"
#include "epiobs/error.hpp"
#include "epiobs/ode/finite_diff.hpp"
#include "epiobs/ode/integrator.hpp"
#include "epiobs/ode/lie_stack.hpp"
#include "epiobs/zoo/zoo.hpp"

using namespace epiobs;

namespace {

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("boarding-school SIR trajectory reproduces the published SSE") {
  const double data[] = {1, 6, 26, 73, 222, 293, 258, 237, 191, 124, 68, 26, 10, 3};
  const auto e = sir_classical(1.9605032, 0.4751562, 763.0, 1.0);
  const auto tr = integrate(e.spec, v2(762.0, 1.0), e.default_params, uniform_grid(0.0, 13.0, 13));
  double sse = 0.0;
  for (std::size_t i = 0; i < 14; ++i) sse += std::pow(data[i] - tr.y[i][0], 2);
  CHECK(rel(sse, 4892.6472) < 0.01);
}

TEST_CASE("zero vector field gives a constant trajectory") {
  ModelSpec m;
  m.id = "zero";
  m.n_states = 3;
  m.n_params = 1;
  m.n_outputs = 1;
  m.f = [](double, const Vector& x, const Vector&) { return Vector::Zero(x.size()).eval(); };
  m.h = [](double, const Vector& x, const Vector&) { return Vector::Constant(1, x.sum()); };
  Vector x0(3);
  x0 << 1.5, -2.0, 1e6;
  const auto tr = integrate(m, x0, Vector::Ones(1), {0.0, 0.3, 7.0, 100.0});
  for (const auto& x : tr.x) CHECK((x - x0).norm() == 0.0);
}

TEST_CASE("population totals are conserved") {
  SUBCASE("demography with constant population") {
    const auto e = sir_demography(0.5, 0.1, 0.02, 1000.0);
    const auto tr = integrate(e.spec, e.default_x0, e.default_params, uniform_grid(0.0, e.horizon, 200));
    for (const auto& x : tr.x) CHECK(rel(x.sum(), 1000.0) < 1e-8);
  }
  SUBCASE("S + I + cumulative removed") {
    const auto e = zoo_by_id("sir-cumulative-removed");
    const double total = e.default_x0.sum();
    const auto tr = integrate(e.spec, e.default_x0, e.default_params, uniform_grid(0.0, e.horizon, 200));
    for (const auto& x : tr.x) CHECK(rel(x.sum(), total) < 1e-8);
  }
}

TEST_CASE("outputs are recomputed exactly from the states") {
  const auto e = zoo_by_id("sir-demography");
  const auto tr = integrate(e.spec, e.default_x0, e.default_params, uniform_grid(0.0, 50.0, 37));
  REQUIRE(tr.t.size() == tr.x.size());
  REQUIRE(tr.t.size() == tr.y.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const Vector y = e.spec.h(tr.t[i], tr.x[i], e.default_params);
    CHECK((y.array() == tr.y[i].array()).all());
  }
}

TEST_CASE("fixed-step mode converges at fifth order") {
  const auto e = sir_classical(1.9605032, 0.4751562, 763.0, 1.0);
  auto final_state = [&](double h) {
    IntegratorOptions o;
    o.fixed_step = h;
    return integrate(e.spec, v2(762.0, 1.0), e.default_params, {0.0, 8.0}, o).x.back();
  };
  const Vector a = final_state(0.2), b = final_state(0.1), c = final_state(0.05);
  // Richardson: (a-b)/(b-c) -> 2^5.
  const double ratio = (a - b).norm() / (b - c).norm();
  CHECK(ratio > 25.0);
  CHECK(ratio < 40.0);
}

TEST_CASE("tightening the tolerance reduces the error against a Richardson reference") {
  const auto e = sir_classical(1.9605032, 0.4751562, 763.0, 1.0);
  IntegratorOptions ref_o;
  ref_o.fixed_step = 0.0025;
  const Vector r1 = integrate(e.spec, v2(762.0, 1.0), e.default_params, {0.0, 13.0}, ref_o).x.back();
  ref_o.fixed_step = 0.00125;
  const Vector r2 = integrate(e.spec, v2(762.0, 1.0), e.default_params, {0.0, 13.0}, ref_o).x.back();
  const Vector ref = r2 + (r2 - r1) / 31.0;

  auto err_at = [&](double tol) {
    IntegratorOptions o;
    o.rel_tol = tol;
    o.abs_tol = tol * 1e-2;
    return (integrate(e.spec, v2(762.0, 1.0), e.default_params, {0.0, 13.0}, o).x.back() - ref).norm();
  };
  const double e1 = err_at(1e-6), e2 = err_at(1e-8);
  CHECK(e2 < e1 / 10.0);
  CHECK(e1 < 1e-6 * 763.0 * 100.0);
}

TEST_CASE("restarting from an intermediate state reproduces the tail") {
  const auto e = zoo_by_id("sir-demography");
  const auto grid = uniform_grid(0.0, 60.0, 60);
  const auto full = integrate(e.spec, e.default_x0, e.default_params, grid);
  const std::vector<double> tail_grid(grid.begin() + 20, grid.end());
  const auto tail = integrate(e.spec, full.x[20], e.default_params, tail_grid);
  for (std::size_t i = 0; i < tail.size(); ++i) {
    const Vector& a = tail.x[i];
    const Vector& b = full.x[20 + i];
    CHECK((a - b).norm() <= 1e-6 * b.norm());
  }
}

TEST_CASE("integrator error reporting") {
  SUBCASE("blow-up reports the last good time") {
    auto rhs = [](double, const Vector& x) { return Vector(x.array().square()); };
    try {
      (void)solve_ode(rhs, Vector::Ones(1), {0.0, 2.0});
      FAIL("expected IntegrationError");
    } catch (const IntegrationError& err) {
      CHECK(err.last_good_time() > 0.99);
      CHECK(err.last_good_time() < 1.01);
    }
  }
  SUBCASE("non-finite derivative") {
    auto rhs = [](double, const Vector& x) { return Vector(x.array().log()); };
    CHECK_THROWS_AS((void)solve_ode(rhs, Vector::Zero(1), {0.0, 1.0}), DomainError);
  }
  SUBCASE("bad grid") {
    auto rhs = [](double, const Vector& x) { return x; };
    CHECK_THROWS_AS((void)solve_ode(rhs, Vector::Ones(1), {0.0, 0.0}), ValidationError);
    CHECK_THROWS_AS((void)solve_ode(rhs, Vector::Ones(1), {}), ValidationError);
  }
}

TEST_CASE("finite_diff_jacobian") {
  SUBCASE("identity map") {
    Vector p(3);
    p << 1.0, -200.0, 3e-4;
    const Matrix J = finite_diff_jacobian([](const Vector& x) { return x; }, p);
    CHECK((J - Matrix::Identity(3, 3)).norm() < 1e-12);
  }
  SUBCASE("square map") {
    const Matrix J = finite_diff_jacobian([](const Vector& x) { return Vector(x.array().square()); },
                                          Vector::Constant(1, 3.0));
    CHECK(std::abs(J(0, 0) - 6.0) < 1e-8);
  }
  SUBCASE("SIR vector field against the analytic A(t)") {
    const auto e = sir_classical(1.9605032, 0.4751562, 763.0, 1.0);
    const Vector x = v2(762.0, 1.0);
    const Matrix fd = finite_diff_jacobian([&](const Vector& xx) { return e.spec.f(0.0, xx, e.default_params); }, x,
                                           e.spec.state_scales);
    const Matrix an = e.spec.jac_f_x(0.0, x, e.default_params);
    for (Eigen::Index i = 0; i < 2; ++i) {
      for (Eigen::Index j = 0; j < 2; ++j) CHECK(std::abs(fd(i, j) - an(i, j)) <= 1e-6 * std::abs(an(i, j)));
    }
  }
  SUBCASE("non-finite evaluation names the coordinate") {
    auto f = [](const Vector& x) { return Vector::Constant(1, std::sqrt(x[1])); };
    try {
      (void)finite_diff_jacobian(f, v2(1.0, 0.0), {}, {"a", "b"});
      FAIL("expected DomainError");
    } catch (const DomainError& err) {
      CHECK(std::string(err.what()).find("b (index 1)") != std::string::npos);
    }
  }
}

TEST_CASE("analytic Jacobians of every zoo model agree with finite differences") {
  std::mt19937_64 rng(20240607);
  for (const auto& id : zoo_ids()) {
    const auto e = zoo_by_id(id);
    CAPTURE(id);
    REQUIRE(e.spec.has_analytic_jacobians());
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const auto [x, th] = e.sample(rng);
      REQUIRE(e.admissible(x, th));
      worst = std::max(worst, jacobian_mismatch(e.spec, 0.37 * i, x, th));
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("lie_stack values") {
  SUBCASE("removal-rate SIR: first derivative in closed form") {
    const double b = 1.5, g = 0.5, N = 1000.0, S = 500.0, I = 100.0;
    const auto e = sir_classical(b, g, N, 1.0, {Incidence::Normalized, SirOutput::RemovalRate});
    const auto ls = lie_stack(e.spec, v2(S, I), e.default_params, 1);
    CHECK(ls.jacobian.rows() == 2);
    CHECK(ls.jacobian.cols() == 2);
    CHECK(ls.value(0)[0] == doctest::Approx(g * I));
    CHECK(rel(ls.value(1)[0], g * (b * S * I / N - g * I)) < 1e-5);
    CHECK_FALSE(ls.noise_warning);
  }
  SUBCASE("constant output has vanishing derivatives") {
    auto e = zoo_by_id("sir-demography");
    e.spec.h = [](double, const Vector&, const Vector&) { return Vector::Constant(1, 42.0); };
    e.spec.jac_h_x = nullptr;
    Vector x(3);
    x << 600.0, 100.0, 300.0;
    const auto ls = lie_stack(e.spec, x, e.default_params, 2);
    CHECK(ls.value(0)[0] == 42.0);
    CHECK(ls.value(1)[0] == 0.0);
    CHECK(ls.value(2)[0] == 0.0);
  }
  SUBCASE("rotation-decay example: y^(p) = (-2 alpha)^p y") {
    const double alpha = 0.7;
    const auto e = academic_unobservable(alpha);
    const Vector x = v2(0.8, -1.3);
    const auto ls = lie_stack(e.spec, x, e.default_params, 2);
    const double y = 0.5 * x.squaredNorm();
    for (std::size_t p = 0; p <= 2; ++p) {
      CHECK(rel(ls.value(p)[0], std::pow(-2.0 * alpha, static_cast<double>(p)) * y) < 1e-4);
    }
  }
  SUBCASE("augmented stack dimensions and order cap") {
    const auto e = sir_classical(1.5, 0.5, 1000.0, 1.0);
    LieOptions o;
    o.augment = true;
    o.unknown_params = {0, 1};
    Vector z(4);
    z << 500.0, 100.0, 1.5, 0.5;
    const auto ls = lie_stack(e.spec, z, e.default_params, 3, o);
    CHECK(ls.jacobian.rows() == 4);
    CHECK(ls.jacobian.cols() == 4);
    CHECK(ls.value(0)[0] == doctest::Approx(100.0));
    CHECK_THROWS_AS((void)lie_stack(e.spec, z, e.default_params, 6, o), ValidationError);
  }
}
