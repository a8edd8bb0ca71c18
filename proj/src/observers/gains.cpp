#include "epiobs/observers/gains.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "epiobs/error.hpp"
#include "epiobs/observability/rank.hpp"

namespace epiobs {
namespace {

using Complex = std::complex<double>;
using Index = Eigen::Index;

double magnitude(const Spectrum& s) {
  double m = 0.0;
  for (const auto& l : s) m = std::max(m, std::abs(l));
  return m;
}

void require_conjugate_closed(const Spectrum& s) {
  const double tol = 1e-12 * std::max(1.0, magnitude(s));
  std::vector<bool> used(s.size(), false);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i].real()) || !std::isfinite(s[i].imag())) {
      throw ValidationError("spectrum contains a non-finite eigenvalue");
    }
    if (used[i] || std::abs(s[i].imag()) <= tol) continue;
    bool found = false;
    for (std::size_t j = i + 1; j < s.size() && !found; ++j) {
      if (!used[j] && std::abs(s[j] - std::conj(s[i])) <= tol) {
        used[i] = used[j] = true;
        found = true;
      }
    }
    if (!found) throw ValidationError("spectrum is not closed under conjugation");
  }
}

/// Elementary symmetric functions e_0 … e_n of a complex set.
std::vector<Complex> elementary(const Spectrum& s) {
  std::vector<Complex> e(s.size() + 1, Complex{0.0});
  e[0] = 1.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    for (std::size_t k = j + 1; k >= 1; --k) e[k] += s[j] * e[k - 1];
  }
  return e;
}

/// Greedy nearest matching; returns the largest pair distance.
double match_spectra(const Spectrum& want, const Spectrum& got) {
  std::vector<bool> used(got.size(), false);
  double worst = 0.0;
  for (const auto& w : want) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < got.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(w - got[j]);
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    used[arg] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

/// Largest number of eigenvalues sharing a cluster (repeated roots are ill-conditioned).
std::size_t max_multiplicity(const Spectrum& s) {
  const double tol = 1e-8 * std::max(1.0, magnitude(s));
  std::size_t m = 1;
  for (const auto& a : s) {
    const auto c = static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [&](const Complex& b) { return std::abs(a - b) <= tol; }));
    m = std::max(m, c);
  }
  return m;
}

}  // namespace

Spectrum real_spectrum(const Vector& lambda) {
  Spectrum s(static_cast<std::size_t>(lambda.size()));
  for (Index i = 0; i < lambda.size(); ++i) s[static_cast<std::size_t>(i)] = lambda[i];
  return s;
}

Vector symmetric_functions(const Vector& lambda) { return symmetric_functions(real_spectrum(lambda)); }

Vector symmetric_functions(const Spectrum& lambda) {
  if (lambda.empty()) throw ValidationError("symmetric_functions: empty set");
  require_conjugate_closed(lambda);
  const auto e = elementary(lambda);
  Vector sigma(static_cast<Index>(lambda.size()));
  for (std::size_t k = 1; k < e.size(); ++k) sigma[static_cast<Index>(k - 1)] = e[k].real();
  return sigma;
}

Vector characteristic_coefficients(const Spectrum& lambda) {
  const Vector sigma = symmetric_functions(lambda);
  const Index n = sigma.size();
  Vector c(n + 1);
  c[n] = 1.0;
  // ∏(ξ − λ) = ξⁿ + Σ_k (−1)^k σ_k ξ^{n−k}
  for (Index k = 1; k <= n; ++k) c[n - k] = (k % 2 == 0 ? 1.0 : -1.0) * sigma[k - 1];
  return c;
}

Vector brunovsky_gain(const Vector& a, const Spectrum& lambda) {
  const Index n = a.size();
  if (static_cast<std::size_t>(n) != lambda.size()) {
    throw ValidationError("brunovsky_gain: need as many eigenvalues as coefficients");
  }
  const Vector sigma = symmetric_functions(lambda);
  Vector g(n);
  for (Index i = 1; i <= n; ++i) {
    const double sign = (n - i) % 2 == 0 ? 1.0 : -1.0;
    g[i - 1] = a[n - i] + sign * sigma[n - i];
  }
  return g;
}

Matrix brunovsky_matrix(const Vector& a) {
  const Index n = a.size();
  Matrix A = Matrix::Zero(n, n);
  for (Index i = 1; i < n; ++i) A(i, i - 1) = 1.0;
  for (Index i = 0; i < n; ++i) A(i, n - 1) = -a[n - 1 - i];
  return A;
}

GainVector pole_place_gain(const Matrix& A, const Matrix& C, const Spectrum& lambda) {
  const Index n = A.rows();
  if (A.cols() != n || C.rows() != 1 || C.cols() != n || static_cast<std::size_t>(n) != lambda.size() || n == 0) {
    throw ValidationError("pole_place_gain: need A n×n, C 1×n and n eigenvalues");
  }
  require_conjugate_closed(lambda);

  const Matrix O = observability_matrix(A, C);
  const auto report = linear_observability(A, C);
  if (!report.full_rank) {
    throw NotObservableError("pole_place_gain: (A, C) is not observable (rank " +
                             std::to_string(report.numerical_rank) + " < " + std::to_string(n) + ")");
  }

  GainVector out;
  out.assigned_spectrum = lambda;
  out.observability_condition = report.condition_number;
  if (out.observability_condition > 1e12) {
    out.warning = "observability matrix is ill-conditioned (cond = " + std::to_string(out.observability_condition) +
                  "); the gain may be inaccurate";
  }

  const Eigen::PartialPivLU<Matrix> Olu(O);
  const Vector L = Olu.solve(Vector::Unit(n, n - 1));
  Matrix P(n, n);
  P.col(0) = L;
  for (Index k = 1; k < n; ++k) P.col(k) = A * P.col(k - 1);
  const Eigen::PartialPivLU<Matrix> Plu(P);
  const Matrix A_bar = Plu.solve(A * P);

  // Brunovsky form: last column of Ā is −(a_n, …, a_1).
  Vector a(n);
  for (Index i = 0; i < n; ++i) a[n - 1 - i] = -A_bar(i, n - 1);
  out.char_coeffs = a;
  out.transform_P = P;
  out.g = P * brunovsky_gain(a, lambda);

  const Matrix closed = A + out.g * C;
  Eigen::EigenSolver<Matrix> es(closed, false);
  const auto ev = es.eigenvalues();
  out.achieved_spectrum.assign(ev.data(), ev.data() + ev.size());
  out.spectrum_error = match_spectra(lambda, out.achieved_spectrum);

  const double scale = std::max(1.0, magnitude(lambda));
  const auto m = static_cast<double>(max_multiplicity(lambda));
  const double tol =
      std::max(1e-6, 10.0 * std::pow(std::numeric_limits<double>::epsilon(), 1.0 / m)) * scale;
  if (!(out.spectrum_error <= tol)) {
    if (out.warning.empty()) {
      throw SingularityError("pole_place_gain: achieved spectrum deviates from the assigned one by " +
                             std::to_string(out.spectrum_error));
    }
    out.warning += "; achieved spectrum deviates by " + std::to_string(out.spectrum_error);
  }
  return out;
}

GainVector pole_place_gain(const Matrix& A, const Matrix& C, const Vector& lambda) {
  return pole_place_gain(A, C, real_spectrum(lambda));
}

Matrix vandermonde(const Vector& lambda) {
  const Index n = lambda.size();
  Matrix V(n, n);
  for (Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (Index j = n - 1; j >= 0; --j) {
      V(i, j) = p;
      p *= lambda[i];
    }
  }
  return V;
}

Matrix vandermonde_inverse(const Vector& lambda) {
  const Index n = lambda.size();
  if (n == 0) throw ValidationError("vandermonde_inverse: empty set");
  Matrix W(n, n);
  for (Index j = 0; j < n; ++j) {
    double denom = 1.0;
    Vector others(n - 1);
    for (Index k = 0, m = 0; k < n; ++k) {
      if (k == j) continue;
      const double d = lambda[j] - lambda[k];
      if (d == 0.0 || std::abs(d) <= 1e-14 * std::max(std::abs(lambda[j]), std::abs(lambda[k]))) {
        throw SingularityError("vandermonde_inverse: coincident eigenvalues");
      }
      denom *= d;
      others[m++] = lambda[k];
    }
    // σ_0 … σ_{n−1} of Λ∖{λ_j}
    Vector sig = Vector::Zero(n);
    sig[0] = 1.0;
    if (n > 1) sig.tail(n - 1) = symmetric_functions(others);
    for (Index i = 0; i < n; ++i) W(i, j) = (i % 2 == 0 ? 1.0 : -1.0) * sig[i] / denom;
  }
  return W;
}

double high_gain_rate_bound(const Vector& lambda, double lipschitz_L) {
  const double n = static_cast<double>(lambda.size());
  const Matrix W = vandermonde_inverse(lambda);
  const double norm_inf = W.cwiseAbs().rowwise().sum().maxCoeff();
  return lambda.maxCoeff() + std::sqrt(n) * lipschitz_L * norm_inf;
}

Vector high_gain_spectrum(std::size_t n, double lipschitz_L, double theta_rate) {
  if (n == 0 || !(lipschitz_L >= 0.0) || !(theta_rate > 0.0)) {
    throw ValidationError("high_gain_spectrum: need n >= 1, L >= 0 and theta > 0");
  }
  const auto family = [&](double alpha) {
    Vector l(static_cast<Index>(n));
    double p = 1.0;
    for (Index i = 0; i < l.size(); ++i) {
      p *= alpha;
      l[i] = -theta_rate * p;
    }
    return l;
  };
  const auto feasible = [&](double alpha) {
    return high_gain_rate_bound(family(alpha), lipschitz_L) <= -theta_rate;
  };

  double hi = 1.1;
  if (feasible(hi)) return family(hi);
  double lo = hi;
  while (!feasible(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw Error("high_gain_spectrum: no feasible spectrum found");
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return family(hi);
}

std::pair<Matrix, Matrix> canonical_pair(std::size_t n) {
  const auto m = static_cast<Index>(n);
  Matrix A = Matrix::Zero(m, m);
  for (Index i = 0; i + 1 < m; ++i) A(i, i + 1) = 1.0;
  Matrix C = Matrix::Zero(1, m);
  C(0, 0) = 1.0;
  return {A, C};
}

}  // namespace epiobs
