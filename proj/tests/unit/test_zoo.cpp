#include <cmath>
#include <random>

#include "doctest.h"
#include "epiobs/error.hpp"
#include "epiobs/ode/integrator.hpp"
#include "epiobs/observability/rank.hpp"
#include "epiobs/zoo/zoo.hpp"

using namespace epiobs;

namespace {

IntegratorOptions tight() {
  IntegratorOptions o;
  o.rel_tol = 1e-12;
  o.abs_tol = 1e-14;
  return o;
}

double sup_gap(const Trajectory& a, const Trajectory& b) {
  double g = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, (a.y[i] - b.y[i]).cwiseAbs().maxCoeff());
  return g;
}

double sup_norm(const Trajectory& a) {
  double g = 0.0;
  for (const auto& y : a.y) g = std::max(g, y.cwiseAbs().maxCoeff());
  return g;
}

}  // namespace

TEST_CASE("default points are admissible and stay admissible over the horizon") {
  for (const auto& id : zoo_ids()) {
    CAPTURE(id);
    const auto e = zoo_by_id(id);
    REQUIRE(e.admissible(e.default_x0, e.default_params));
    const auto tr = integrate(e.spec, e.default_x0, e.default_params, uniform_grid(0.0, e.horizon, 400));
    for (const auto& x : tr.x) {
      if (id == "academic") {
        CHECK(e.admissible(x, e.default_params));
      } else {
        CHECK(x.minCoeff() >= -1e-9 * std::max(1.0, x.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST_CASE("nonnegative orthant is forward invariant") {
  std::mt19937_64 rng(7);
  for (const auto& id : zoo_ids()) {
    if (id == "academic") continue;  // evolves on R^2, not a compartmental model
    CAPTURE(id);
    const auto e = zoo_by_id(id);
    for (int k = 0; k < 5; ++k) {
      auto [x0, th] = e.sample(rng);
      x0 = x0.cwiseAbs();
      const auto tr = integrate(e.spec, x0, th, uniform_grid(0.0, e.horizon, 100));
      for (const auto& x : tr.x) CHECK(x.minCoeff() >= -1e-9);
    }
  }
}

TEST_CASE("SIR classical") {
  const auto e = sir_classical(1.9605032, 0.4751562, 763.0, 1.0);
  CHECK(e.spec.n_states == 2);
  CHECK(e.default_params[0] == 1.9605032);

  SUBCASE("disease-free invariance") {
    Vector x0(2);
    x0 << 763.0, 0.0;
    const auto tr = integrate(e.spec, x0, e.default_params, uniform_grid(0.0, 13.0, 13));
    for (const auto& x : tr.x) CHECK(x[1] == 0.0);
  }
  SUBCASE("scaling (S, I, N, k) -> (lS, lI, lN, k/l) leaves y unchanged") {
    const double l = 3.7;
    Vector xa(2), xb(2);
    xa << 700.0, 5.0;
    xb = l * xa;
    Vector tb = e.default_params;
    tb[2] *= l;
    tb[3] /= l;
    const auto grid = uniform_grid(0.0, 13.0, 130);
    const auto a = integrate(e.spec, xa, e.default_params, grid, tight());
    const auto b = integrate(e.spec, xb, tb, grid, tight());
    CHECK(sup_gap(a, b) <= 1e-8 * sup_norm(a));
  }
  SUBCASE("nonpositive parameters are rejected") {
    CHECK_THROWS_AS((void)sir_classical(0.0, 0.5, 763.0, 1.0), ValidationError);
    CHECK_THROWS_AS((void)sir_classical(1.0, -0.5, 763.0, 1.0), ValidationError);
    CHECK_THROWS_AS((void)sir_classical(1.0, 0.5, 763.0, 0.0), ValidationError);
  }
}

TEST_CASE("SIR cumulative incidence") {
  const auto e = sir_cumulative(1.9605032, 0.4751562, 763.0, 0.4);
  const auto grid = uniform_grid(0.0, 13.0, 130);
  SUBCASE("scaling leaves the output unchanged") {
    const double l = 0.25;
    Vector xa(3), xb(3);
    xa << 700.0, 5.0, 0.0;
    xb = l * xa;
    Vector tb = e.default_params;
    tb[2] *= l;
    tb[3] /= l;
    const auto a = integrate(e.spec, xa, e.default_params, grid, tight());
    const auto b = integrate(e.spec, xb, tb, grid, tight());
    CHECK(sup_gap(a, b) <= 1e-8 * sup_norm(a));
  }
  SUBCASE("no transmission, no incidence") {
    Vector th = e.default_params;
    th[0] = 0.0;
    const auto tr = integrate(e.spec, e.default_x0, th, grid);
    for (const auto& y : tr.y) CHECK(y[0] == 0.0);
  }
}

TEST_CASE("SIR input-output relation holds along trajectories") {
  const double b = 1.9605032, g = 0.4751562, N = 763.0, k = 0.6;
  const auto e = sir_classical(b, g, N, k);
  const auto tr = integrate(e.spec, e.default_x0, e.default_params, uniform_grid(0.0, 13.0, 52));
  for (const auto& x : tr.x) {
    const double S = x[0], I = x[1];
    const double dS = -b * S * I / N, dI = b * S * I / N - g * I;
    const double ddI = b / N * (dS * I + S * dI) - g * dI;
    const double y = k * I, dy = k * dI, ddy = k * ddI;
    const double c = b / (k * N);
    const double terms[] = {y * ddy, c * y * y * dy, c * g * y * y * y, -dy * dy};
    double sum = 0.0, mag = 0.0;
    for (double t : terms) {
      sum += t;
      mag += std::abs(t);
    }
    CHECK(std::abs(sum) <= 1e-4 * mag);
  }
}

TEST_CASE("SIR with demography and fluctuating rates keep N constant") {
  const auto e = sir_fluctuating_default(11);
  const auto tr = integrate(e.spec, e.default_x0, e.default_params, uniform_grid(0.0, 50.0, 50));
  for (const auto& x : tr.x) CHECK(std::abs(x.sum() - 1000.0) <= 1e-8 * 1000.0);
  const PiecewiseConstantSignal sig(0.4, 0.2, 1.0, 10.0, 3);
  for (double t = 0.0; t < 10.0; t += 0.1) {
    CHECK(sig(t) >= 0.32);
    CHECK(sig(t) <= 0.48);
    CHECK(sig(t) == sig(std::floor(t) + 0.5));
  }
}

TEST_CASE("malaria matrices") {
  const auto mm = malaria_matrices(malaria_default_params());
  CHECK((mm.C * mm.A_bar).cwiseAbs().maxCoeff() == 0.0);
  const auto e = zoo_by_id("malaria");
  // f = A x + beta S M E + Lambda e1
  const Vector x = e.default_x0 + Vector::LinSpaced(7, 1.0, 7.0);
  const Vector f = e.spec.f(0.0, x, e.default_params);
  const Vector f2 = mm.A * x + e.default_params[14] * x[0] * x[6] * mm.E + mm.Lambda * mm.e1;
  CHECK((f - f2).norm() <= 1e-12 * f.norm());
}

TEST_CASE("two-compartment model with x2(0) = 0") {
  const auto e = two_compartment(0.3, 0.2);
  const auto grid = uniform_grid(0.0, 30.0, 300);
  Vector x0(2);
  x0 << 1.0, 0.0;
  SUBCASE("a12 is invisible when x2(0) = 0") {
    Vector tb(2);
    tb << 0.9, 0.2;
    const auto p = indistinguishability_probe(e.spec, x0, x0, e.default_params, tb, grid);
    CHECK(p.gap <= 1e-8 * p.y_norm);
  }
  SUBCASE("swapped rates need a compensating x2(0)") {
    Vector tb(2);
    tb << 0.2, 0.3;
    const auto plain = indistinguishability_probe(e.spec, x0, x0, e.default_params, tb, grid);
    CHECK(plain.gap > 1e-3 * plain.y_norm);
    Vector xb(2);
    xb << 1.0, (0.3 - 0.2) / 0.2;
    const auto comp = indistinguishability_probe(e.spec, x0, xb, e.default_params, tb, grid);
    CHECK(comp.gap <= 1e-8 * comp.y_norm);
  }
}

TEST_CASE("five-class model is observable only through x5") {
  for (std::size_t c = 1; c <= 5; ++c) {
    CAPTURE(c);
    const auto [A, C] = five_class_matrices(0.5, 2.0, 0.1, 0.2, c);
    const auto r = linear_observability(A, C);
    CHECK(r.full_rank == (c == 5));
  }
}

TEST_CASE("with_params overrides parameters and validates them") {
  const auto e = zoo_by_id("three-stage");
  Vector th = e.default_params;
  th[0] = 0.2;
  const auto e2 = with_params(e, th);
  CHECK(e2.linear_form->A(0, 0) == doctest::Approx(-(0.2 + 0.05)));
  th[1] = -1.0;
  CHECK_THROWS_AS((void)with_params(e, th), ValidationError);
  CHECK_THROWS_AS((void)zoo_by_id("nope"), UsageError);
}
