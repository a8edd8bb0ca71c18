#include <cmath>
#include <random>

#include "doctest.h"
#include "epiobs/observability/rank.hpp"
#include "epiobs/zoo/zoo.hpp"

using namespace epiobs;

namespace {

Vector vec4(double a, double b, double c, double d) {
  Vector v(4);
  v << a, b, c, d;
  return v;
}

}  // namespace

TEST_CASE("linear observability matrices") {
  SUBCASE("A = 0, C = e1") {
    const auto r = linear_observability(Matrix::Zero(2, 2), Matrix::Identity(1, 2));
    CHECK(r.numerical_rank == 1);
    CHECK_FALSE(r.full_rank);
    CHECK(std::isinf(r.condition_number));
    CHECK(r.null_directions.cols() == 1);
  }
  SUBCASE("malaria pair (A_bar, C) has rank one") {
    const auto mm = malaria_matrices(malaria_default_params());
    CHECK(linear_observability(mm.A_bar, mm.C).numerical_rank == 1);
  }
  SUBCASE("rank never exceeds the matrix dimensions; condition >= 1 when full") {
    const auto [A, C] = five_class_matrices(0.5, 2.0, 0.1, 0.2, 5);
    const auto r = linear_observability(A, C);
    CHECK(r.full_rank);
    CHECK(r.condition_number >= 1.0);
    CHECK(r.numerical_rank <= 5);
  }
}

TEST_CASE("SIR augmented stack: determinant matches the closed form") {
  const double S = 500.0, I = 100.0, b = 1.5, g = 0.5, N = 1000.0, k = 1.0;
  const auto e = sir_classical(b, g, N, k);
  OrcOptions o;
  o.augment = true;
  o.unknown_params = {0, 1};
  const auto r = orc_rank(e.spec, vec4(S, I, b, g), e.default_params, o);
  REQUIRE(r.determinant.has_value());
  const double closed = -std::pow(k, 4) * std::pow(b, 4) * S * std::pow(I, 6) / std::pow(N, 5);
  CHECK(std::abs(*r.determinant - closed) <= 1e-3 * std::abs(closed));
  CHECK(r.full_rank);
  CHECK(r.stack_order == 3);
  CHECK_FALSE(r.degraded);
}

TEST_CASE("SIR with k unknown is rank deficient at sampled points") {
  const auto e = sir_classical(1.5, 0.5, 1000.0, 1.0);
  OrcOptions o;
  o.augment = true;
  o.unknown_params = {0, 1, 3};
  const auto s = sampled_orc(e, {}, o, 20, 99);
  CHECK(s.reports.size() == 20);
  CHECK(s.max_rank < 5);
  CHECK_FALSE(s.generically_full_rank);
}

TEST_CASE("SIR at the disease-free equilibrium is not observable") {
  const auto e = sir_classical(1.5, 0.5, 1000.0, 1.0);
  Vector x(2);
  x << 800.0, 0.0;
  const auto r = orc_rank(e.spec, x, e.default_params);
  CHECK_FALSE(r.full_rank);
  CHECK(r.numerical_rank == 1);
}

TEST_CASE("SIR with N and k known is generically identifiable") {
  const auto e = sir_classical(1.5, 0.5, 1000.0, 1.0);
  OrcOptions o;
  o.augment = true;
  o.unknown_params = {0, 1};
  Vector x(2);
  x << 600.0, 200.0;
  const auto s = sampled_orc(e, {{x, e.default_params}}, o, 20, 5);
  CHECK(s.generically_full_rank);
  CHECK(s.reports.size() == 21);
}

TEST_CASE("rotation-decay example: parameter identifiable, state not observable") {
  const auto e = academic_unobservable(0.5);
  Vector x(2);
  x << 0.8, -0.3;
  CHECK(orc_rank(e.spec, x, e.default_params).numerical_rank == 1);
  OrcOptions o;
  o.augment = true;
  Vector z(3);
  z << 0.8, -0.3, 0.5;
  CHECK(orc_rank(e.spec, z, e.default_params, o).numerical_rank == 2);
}

TEST_CASE("ORC on a linear model agrees with the observability matrix") {
  std::mt19937_64 rng(3);
  for (std::size_t c = 1; c <= 5; ++c) {
    const auto e = five_class_age(0.5, 2.0, 0.1, 0.2, c);
    const auto lin = linear_observability(e.linear_form->A, e.linear_form->C);
    for (int i = 0; i < 3; ++i) {
      const auto [x, th] = e.sample(rng);
      (void)th;
      const auto r = orc_rank(e.spec, x, e.default_params);
      CAPTURE(c);
      CHECK(r.numerical_rank == lin.numerical_rank);
    }
  }
}

TEST_CASE("rank verdict invariant under output scaling; monotone in order; null directions") {
  auto e = sir_demography(0.5, 0.1, 0.02, 1000.0);
  Vector x(3);
  x << 600.0, 150.0, 250.0;
  const auto base = orc_rank(e.spec, x, e.default_params);
  auto scaled = e;
  const auto h = e.spec.h;
  scaled.spec.h = [h](double t, const Vector& xx, const Vector& th) { return Vector(-250.0 * h(t, xx, th)); };
  const auto r2 = orc_rank(scaled.spec, x, e.default_params);
  CHECK(base.numerical_rank == r2.numerical_rank);

  std::size_t prev = 0;
  for (std::size_t k = 0; k <= 4; ++k) {
    OrcOptions o;
    o.order = k;
    const auto r = orc_rank(e.spec, x, e.default_params, o);
    CHECK(r.numerical_rank >= prev);
    prev = r.numerical_rank;
    for (Eigen::Index j = 0; j < r.null_directions.cols(); ++j) {
      CHECK((r.analyzed * r.null_directions.col(j)).norm() <= 10.0 * r.tolerance);
    }
  }
}

TEST_CASE("identical inputs give a zero output gap") {
  const auto e = zoo_by_id("sir-demography");
  const auto p = indistinguishability_probe(e.spec, e.default_x0, e.default_x0, e.default_params, e.default_params,
                                            uniform_grid(0.0, 20.0, 20));
  CHECK(p.gap == 0.0);
  CHECK(p.y_norm > 0.0);
}

TEST_CASE("linear detectability") {
  SUBCASE("malaria pair: unobservable block is Hurwitz and matches the known spectrum") {
    const Vector th = malaria_default_params();
    const auto mm = malaria_matrices(th);
    const auto d = detectability_linear(mm.A_bar, mm.C);
    CHECK(d.verdict == Detectability::Detectable);
    CHECK(d.unobservable_dim == 6);
    std::vector<double> expected = {-th[1], -th[13], -th[6] - th[11], -th[5] - th[10], -th[4] - th[9],
                                    -th[3] - th[8] - th[7]};
    std::sort(expected.begin(), expected.end());
    REQUIRE(d.unobservable_eigenvalues.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(d.unobservable_eigenvalues[i].real() == doctest::Approx(expected[i]).epsilon(1e-8));
      CHECK(std::abs(d.unobservable_eigenvalues[i].imag()) < 1e-9);
    }
  }
  SUBCASE("Hurwitz A with C = 0") {
    Matrix A(2, 2);
    A << -1.0, 2.0, 0.0, -3.0;
    CHECK(detectability_linear(A, Matrix::Zero(1, 2)).verdict == Detectability::Detectable);
  }
  SUBCASE("unstable unobservable mode") {
    Matrix A(2, 2);
    A << -1.0, 0.0, 0.0, 0.5;
    Matrix C(1, 2);
    C << 1.0, 0.0;
    CHECK(detectability_linear(A, C).verdict == Detectability::NotDetectable);
  }
  SUBCASE("zero unobservable eigenvalue is flagged") {
    Matrix A = Matrix::Zero(2, 2);
    A(0, 0) = -1.0;
    Matrix C(1, 2);
    C << 1.0, 0.0;
    const auto d = detectability_linear(A, C);
    CHECK(d.verdict == Detectability::Marginal);
    CHECK(d.zero_eigenvalue);
  }
}
