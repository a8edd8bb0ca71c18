#include <algorithm>
#include <cmath>
#include <limits>

#include "epiobs/error.hpp"
#include "epiobs/estimation/estimation.hpp"

namespace epiobs {

namespace {

using Eigen::Index;

// Continued fraction for I_x(a, b) (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr int max_iter = 100000;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) return h;
  }
  throw Error("incomplete_beta: continued fraction did not converge");
}

// I_x(a, b) with the complement 1 − x supplied separately to avoid cancellation.
double incomplete_beta_split(double a, double b, double x, double one_minus_x) {
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(one_minus_x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, one_minus_x) / b;
}

// Upper tail P(T > t) for t ≥ 0.
double t_upper_tail(double t, double dof) {
  const double t2 = t * t;
  return 0.5 * incomplete_beta_split(0.5 * dof, 0.5, dof / (dof + t2), t2 / (dof + t2));
}

double t_pdf(double t, double dof) {
  const double lg = std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) - 0.5 * std::log(dof * M_PI);
  return std::exp(lg - 0.5 * (dof + 1.0) * std::log1p(t * t / dof));
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("incomplete_beta: x must lie in [0, 1]");
  return incomplete_beta_split(a, b, x, 1.0 - x);
}

double t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw ValidationError("t_cdf: dof must be positive");
  const double upper = t_upper_tail(std::abs(t), dof);
  return t >= 0.0 ? 1.0 - upper : upper;
}

double t_quantile(double dof, double level) {
  if (!(dof >= 1.0)) throw ValidationError("t_quantile: dof must be at least 1");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("t_quantile: level must lie in (0, 1)");
  if (level == 0.5) return 0.0;
  if (level < 0.5) return -t_quantile(dof, 1.0 - level);
  const double tail = 1.0 - level;
  // Bracket [lo, hi] with upper_tail(lo) ≥ tail ≥ upper_tail(hi).
  double lo = 0.0;
  double hi = 2.0;
  while (t_upper_tail(hi, dof) > tail) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw Error("t_quantile: failed to bracket the quantile");
  }
  double q = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double g = t_upper_tail(q, dof) - tail;  // decreasing in q
    if (g > 0.0)
      lo = q;
    else
      hi = q;
    double next = q + g / t_pdf(q, dof);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - q) < 1e-12 || hi - lo < 1e-12) return next;
    q = next;
  }
  return q;
}

FimReport fim(const std::vector<Matrix>& chi, double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ValidationError("fim: sigma2 must be positive");
  if (chi.empty()) throw ValidationError("fim: no sensitivity samples");
  const Matrix S = stack_rows(chi);
  const Index q = S.cols();
  FimReport r;
  r.sigma2 = sigma2;
  r.fim = Matrix::Zero(q, q);
  for (const auto& c : chi) r.fim.noalias() += c.transpose() * c;
  r.fim /= sigma2;
  r.fim = 0.5 * (r.fim + r.fim.transpose()).eval();

  Eigen::JacobiSVD<Matrix> svd_raw(S);
  const auto& sr = svd_raw.singularValues();
  const double smin = sr.size() < q ? 0.0 : sr[q - 1];
  r.condition_number = smin > 0.0 ? std::pow(sr[0] / smin, 2) : std::numeric_limits<double>::infinity();
  r.ill_conditioned = !(r.condition_number <= 1e12);

  // Covariance σ² (χᵀχ)⁺ through the column-scaled sensitivity matrix.
  Vector scale = S.colwise().norm().transpose();
  for (Index j = 0; j < q; ++j)
    if (!(scale[j] > 0.0)) scale[j] = 1.0;
  const Matrix Ss = S * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Matrix> svd(Ss, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(Ss.rows(), Ss.cols())) * (s.size() ? s[0] : 0.0) * 1e-10;
  Vector inv_s2 = Vector::Zero(q);
  for (Index i = 0; i < s.size(); ++i) {
    if (s[i] > tol)
      inv_s2[i] = 1.0 / (s[i] * s[i]);
    else
      r.pseudo_inverse = true;
  }
  if (s.size() < q) r.pseudo_inverse = true;
  const Matrix& V = svd.matrixV();
  const Matrix Dinv = scale.cwiseInverse().asDiagonal();
  r.covariance = sigma2 * Dinv * V * inv_s2.asDiagonal() * V.transpose() * Dinv;
  r.covariance = 0.5 * (r.covariance + r.covariance.transpose()).eval();
  if (r.pseudo_inverse) r.ill_conditioned = true;
  return r;
}

FimReport confidence_intervals(const FitResult& fit, FimReport report, double level) {
  const Index q = report.covariance.rows();
  if (fit.estimate.size() != q) throw ValidationError("confidence_intervals: estimate and FIM size differ");
  if (!(fit.dof >= 1.0)) throw ValidationError("confidence_intervals: fewer than one residual degree of freedom");
  report.dof = fit.dof;
  report.estimate = fit.estimate;
  report.names = fit.names;
  report.t_quantile = t_quantile(fit.dof, level);
  report.standard_errors.resize(q);
  report.half_widths.resize(q);
  report.intervals.clear();
  for (Index k = 0; k < q; ++k) {
    const double v = report.covariance(k, k);
    if (v < 0.0 || !std::isfinite(v))
      throw Error("confidence_intervals: covariance diagonal " + std::to_string(k) + " is negative or non-finite");
    report.standard_errors[k] = std::sqrt(v);
    report.half_widths[k] = report.t_quantile * report.standard_errors[k];
    report.intervals.emplace_back(fit.estimate[k] - report.half_widths[k], fit.estimate[k] + report.half_widths[k]);
  }
  return report;
}

}  // namespace epiobs
