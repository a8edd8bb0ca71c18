#include "epiobs/observability/rank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "epiobs/error.hpp"
#include "epiobs/ode/integrator.hpp"

namespace epiobs {

RankReport analyze_rank(const Matrix& M, const RankOptions& opt, double noise_floor) {
  RankReport r;
  r.analyzed = M;
  r.column_scales = Vector::Ones(M.cols());
  if (M.size() == 0) return r;

  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  r.singular_values = svd.singularValues();
  const double smax = r.singular_values.size() > 0 ? r.singular_values[0] : 0.0;
  const double dim = static_cast<double>(std::max(M.rows(), M.cols()));
  r.tolerance = std::max(dim * smax * opt.rel_tol, noise_floor);

  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < r.singular_values.size(); ++i) {
    if (r.singular_values[i] > r.tolerance) ++rank;
  }
  r.numerical_rank = rank;
  const auto n = static_cast<std::size_t>(M.cols());
  r.full_rank = rank == n;
  if (r.full_rank && n > 0) {
    r.condition_number = smax / r.singular_values[static_cast<Eigen::Index>(n - 1)];
  } else {
    r.condition_number = std::numeric_limits<double>::infinity();
  }
  const auto V = svd.matrixV();
  r.null_directions = V.rightCols(static_cast<Eigen::Index>(n - rank));
  if (M.rows() == M.cols()) r.determinant = M.determinant();
  return r;
}

Matrix observability_matrix(const Matrix& A, const Matrix& C) {
  if (A.rows() != A.cols()) throw ValidationError("observability_matrix: A must be square");
  if (C.cols() != A.rows()) throw ValidationError("observability_matrix: C has wrong column count");
  const auto n = A.rows(), m = C.rows();
  Matrix O(n * m, n);
  Matrix blk = C;
  for (Eigen::Index i = 0; i < n; ++i) {
    O.middleRows(i * m, m) = blk;
    blk = blk * A;
  }
  return O;
}

RankReport linear_observability(const Matrix& A, const Matrix& C, const RankOptions& opt) {
  auto r = analyze_rank(observability_matrix(A, C), opt);
  r.stack_order = static_cast<std::size_t>(std::max<Eigen::Index>(A.rows() - 1, 0));
  return r;
}

RankReport orc_rank(const ModelSpec& model, const Vector& point, const Vector& theta, const OrcOptions& opt) {
  LieOptions lo;
  lo.augment = opt.augment;
  lo.unknown_params = opt.unknown_params;
  lo.t = opt.t;
  const auto dim = static_cast<std::size_t>(point.size());
  if (dim == 0) throw ValidationError("orc_rank: empty point");
  const std::size_t order = opt.order.value_or(dim - 1);
  const auto ls = lie_stack(model, point, theta, order, lo);

  const Vector scales = opt.rank.scale_columns ? ls.point_scales : Vector::Ones(point.size()).eval();
  const Matrix scaled = ls.jacobian * scales.asDiagonal();
  const double noise = opt.rank.noise_factor * (ls.jacobian_error * scales.asDiagonal()).norm();
  auto r = analyze_rank(scaled, opt.rank, noise);
  if (ls.jacobian.rows() == ls.jacobian.cols()) r.determinant = ls.jacobian.determinant();
  r.point = point;
  r.stack_order = order;
  r.column_scales = scales;
  r.degraded = ls.noise_warning;
  return r;
}

SampledRank sampled_orc(const ZooEntry& entry, const std::vector<std::pair<Vector, Vector>>& user_points,
                        const OrcOptions& opt, std::size_t n_random, std::uint64_t seed) {
  std::vector<std::size_t> unknown = opt.unknown_params;
  if (opt.augment && unknown.empty()) {
    for (std::size_t k = 0; k < entry.spec.n_params; ++k) unknown.push_back(k);
  }
  auto to_point = [&](const Vector& x, const Vector& th) {
    if (!opt.augment) return x;
    Vector z(x.size() + static_cast<Eigen::Index>(unknown.size()));
    z.head(x.size()) = x;
    for (std::size_t k = 0; k < unknown.size(); ++k) {
      z[x.size() + static_cast<Eigen::Index>(k)] = th[static_cast<Eigen::Index>(unknown[k])];
    }
    return z;
  };

  std::vector<std::pair<Vector, Vector>> pts = user_points;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n_random; ++i) pts.push_back(entry.sample(rng));

  SampledRank out;
  out.generically_full_rank = !pts.empty();
  out.min_rank = std::numeric_limits<std::size_t>::max();
  for (const auto& [x, th] : pts) {
    auto r = orc_rank(entry.spec, to_point(x, th), th, opt);
    out.generically_full_rank = out.generically_full_rank && r.full_rank;
    out.min_rank = std::min(out.min_rank, r.numerical_rank);
    out.max_rank = std::max(out.max_rank, r.numerical_rank);
    out.reports.push_back(std::move(r));
  }
  if (pts.empty()) out.min_rank = 0;
  return out;
}

ProbeResult indistinguishability_probe(const ModelSpec& model, const Vector& point_a, const Vector& point_b,
                                       const Vector& theta_a, const Vector& theta_b,
                                       const std::vector<double>& grid) {
  IntegratorOptions o;
  o.rel_tol = 1e-12;
  o.abs_tol = 1e-14;
  const auto ta = integrate(model, point_a, theta_a, grid, o);
  const auto tb = integrate(model, point_b, theta_b, grid, o);
  ProbeResult p;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    p.gap = std::max(p.gap, (ta.y[i] - tb.y[i]).cwiseAbs().maxCoeff());
    p.y_norm = std::max(p.y_norm, ta.y[i].cwiseAbs().maxCoeff());
  }
  return p;
}

DetectabilityReport detectability_linear(const Matrix& A, const Matrix& C, const RankOptions& opt) {
  const auto rep = linear_observability(A, C, opt);
  DetectabilityReport d;
  const Matrix& Q = rep.null_directions;  // orthonormal basis of ker O, which is A-invariant
  d.unobservable_dim = static_cast<std::size_t>(Q.cols());
  if (Q.cols() == 0) return d;

  const Matrix A22 = Q.transpose() * A * Q;
  Eigen::EigenSolver<Matrix> es(A22, false);
  const double tol = 1e-9 * std::max(1.0, A.norm());
  bool unstable = false;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const auto lam = es.eigenvalues()[i];
    d.unobservable_eigenvalues.push_back(lam);
    if (std::abs(lam.real()) <= tol) d.zero_eigenvalue = true;
    else if (lam.real() > 0.0) unstable = true;
  }
  std::sort(d.unobservable_eigenvalues.begin(), d.unobservable_eigenvalues.end(),
            [](const auto& a, const auto& b) { return a.real() < b.real(); });
  d.verdict = unstable ? Detectability::NotDetectable
                       : (d.zero_eigenvalue ? Detectability::Marginal : Detectability::Detectable);
  return d;
}

const char* to_string(Detectability d) noexcept {
  switch (d) {
    case Detectability::Detectable: return "detectable";
    case Detectability::Marginal: return "marginal";
    case Detectability::NotDetectable: return "not-detectable";
  }
  return "unknown";
}

}  // namespace epiobs
