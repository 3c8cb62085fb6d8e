#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sshdi/errors.hpp"
#include "sshdi/matrix.hpp"
#include "sshdi/rng.hpp"

namespace sshdi {

/// Lower-triangular Cholesky factor L with L * L^T == sigma.
///
/// Throws NotSymmetric if sigma deviates from symmetry by more than
/// 1e-10 relative to its largest entry, and NotPositiveDefinite when a
/// pivot is nonpositive.
inline Matrix cholesky(const Matrix& sigma) {
  const std::size_t p = sigma.rows();
  if (p == 0 || sigma.cols() != p) throw DimensionError("cholesky: matrix must be square and nonempty");

  const double scale = max_abs(sigma);
  const double sym_tol = 1e-10 * std::max(scale, 1e-300);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j)
      if (!(std::abs(sigma(i, j) - sigma(j, i)) <= sym_tol))
        throw NotSymmetric("cholesky: input not symmetric at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");

  Matrix l(p, p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double d = sigma(j, j) - dot(l.row_ptr(j), l.row_ptr(j), j);
    if (!(d > 0.0))
      throw NotPositiveDefinite("cholesky: nonpositive pivot at column " + std::to_string(j));
    d = std::sqrt(d);
    l(j, j) = d;
    for (std::size_t i = j + 1; i < p; ++i)
      l(i, j) = (sigma(i, j) - dot(l.row_ptr(i), l.row_ptr(j), j)) / d;
  }
  return l;
}

/// Householder QR with column pivoting and rank detection.
///
/// Columns are brought in by decreasing residual norm; a column whose pivot
/// magnitude falls below rank_tol times the largest pivot is dropped rather
/// than allowed to produce an unstable solve.
class PivotedQr {
 public:
  static constexpr double kDefaultRankTol = 1e-10;

  /// cols: k columns, each of length n. Consumed by value.
  PivotedQr(std::vector<Vector> cols, double rank_tol = kDefaultRankTol)
      : a_(std::move(cols)),
        n_(a_.empty() ? 0 : a_[0].size()),
        k_(a_.size()),
        perm_(k_),
        gamma_(std::min(n_, k_), 0.0) {
    for (std::size_t j = 0; j < k_; ++j) perm_[j] = j;
    factor(rank_tol);
  }

  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  std::size_t rank() const { return rank_; }
  double first_pivot() const { return first_pivot_; }
  double rank_tol() const { return rank_tol_; }

  /// Original column indices that were pivoted out as rank-deficient.
  std::vector<std::size_t> dropped() const {
    std::vector<std::size_t> d(perm_.begin() + static_cast<std::ptrdiff_t>(rank_), perm_.end());
    std::sort(d.begin(), d.end());
    return d;
  }

  /// Apply Q^T (the rank_ reflectors, in order) to a length-n vector.
  void apply_qt(Vector& v) const {
    for (std::size_t t = 0; t < rank_; ++t) reflect(t, v);
  }

  struct Solution {
    Vector coef;                // length k, dropped entries zero
    std::vector<bool> present;  // per original column
  };

  /// Back-substitute against the leading rank x rank block of R.
  /// qty must already be Q^T * y.
  Solution solve(const Vector& qty) const {
    Vector z(rank_, 0.0);
    for (std::size_t t = rank_; t-- > 0;) {
      double s = qty[t];
      for (std::size_t u = t + 1; u < rank_; ++u) s -= a_[u][t] * z[u];
      z[t] = s / r_diag_[t];
    }
    Solution sol{Vector(k_, 0.0), std::vector<bool>(k_, false)};
    for (std::size_t t = 0; t < rank_; ++t) {
      sol.coef[perm_[t]] = z[t];
      sol.present[perm_[t]] = true;
    }
    return sol;
  }

  /// Coefficient a new column would receive if appended to this design,
  /// i.e. the last coefficient of lsq(y ~ [factored columns, extra]).
  /// qty must be Q^T * y as produced by apply_qt. Returns false when the
  /// extra column is numerically inside the span of the factored columns.
  bool append_coefficient(Vector extra, const Vector& qty, double* coef_out) const {
    apply_qt(extra);
    double norm2 = 0.0;
    for (std::size_t i = rank_; i < n_; ++i) norm2 += extra[i] * extra[i];
    const double pivot = std::sqrt(norm2);
    if (pivot <= rank_tol_ * first_pivot_ || pivot == 0.0) return false;
    const double alpha = extra[rank_] >= 0.0 ? -pivot : pivot;
    // Householder reflector for the tail; only the first transformed
    // component of qty's tail is needed.
    extra[rank_] -= alpha;
    double vv = 0.0, vy = 0.0;
    for (std::size_t i = rank_; i < n_; ++i) {
      vv += extra[i] * extra[i];
      vy += extra[i] * qty[i];
    }
    const double head = qty[rank_] - 2.0 * (vy / vv) * extra[rank_];
    *coef_out = head / alpha;
    return true;
  }

 private:
  void factor(double rank_tol) {
    rank_tol_ = rank_tol;
    const std::size_t steps = std::min(n_, k_);
    std::size_t t = 0;
    for (; t < steps; ++t) {
      // Pick the remaining column with the largest tail norm.
      std::size_t best = t;
      double best_norm2 = -1.0;
      for (std::size_t j = t; j < k_; ++j) {
        double s = 0.0;
        for (std::size_t i = t; i < n_; ++i) s += a_[j][i] * a_[j][i];
        if (s > best_norm2) {
          best_norm2 = s;
          best = j;
        }
      }
      if (best != t) {
        std::swap(a_[t], a_[best]);
        std::swap(perm_[t], perm_[best]);
      }
      const double pivot = std::sqrt(std::max(best_norm2, 0.0));
      if (t == 0) first_pivot_ = pivot;
      if (pivot <= rank_tol_ * first_pivot_) break;

      // Householder vector stored in-place below the diagonal of column t.
      const double alpha = a_[t][t] >= 0.0 ? -pivot : pivot;
      a_[t][t] -= alpha;
      double vv = 0.0;
      for (std::size_t i = t; i < n_; ++i) vv += a_[t][i] * a_[t][i];
      gamma_[t] = vv > 0.0 ? 2.0 / vv : 0.0;
      for (std::size_t j = t + 1; j < k_; ++j) reflect(t, a_[j]);
      r_diag_.push_back(alpha);
    }
    rank_ = r_diag_.size();
  }

  // Apply reflector t to v[t..n). After reflect(t, a_[j]) the entry
  // a_[j][t] holds R(t, j); R(t, t) lives in r_diag_ because the reflector
  // overwrote the pivot column.
  void reflect(std::size_t t, Vector& v) const {
    const Vector& h = a_[t];
    double s = 0.0;
    for (std::size_t i = t; i < n_; ++i) s += h[i] * v[i];
    s *= gamma_[t];
    for (std::size_t i = t; i < n_; ++i) v[i] -= s * h[i];
  }

 public:
  /// R(t, u) for t <= u < rank (in pivoted order).
  double r_entry(std::size_t t, std::size_t u) const {
    return t == u ? r_diag_[t] : a_[u][t];
  }

 private:
  std::vector<Vector> a_;
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::size_t rank_ = 0;
  std::vector<std::size_t> perm_;
  Vector gamma_;
  Vector r_diag_;
  double first_pivot_ = 0.0;
  double rank_tol_ = kDefaultRankTol;
};

struct OlsResult {
  Vector coef;                // length k, dropped entries zero
  std::vector<bool> present;  // per column
  std::size_t rank = 0;
  std::vector<std::size_t> dropped;
};

/// Rank-tolerant least squares: argmin |y - xs*coef|^2 with collinear
/// columns dropped (reported absent, not zero) instead of destabilizing
/// the solve.
inline OlsResult ols_solve(const Matrix& xs, const Vector& y) {
  const std::size_t n = xs.rows(), k = xs.cols();
  if (y.size() != n) throw DimensionError("ols_solve: y length mismatch");
  if (n <= k) throw DimensionError("ols_solve: need more rows than columns");
  std::vector<Vector> cols(k);
  for (std::size_t j = 0; j < k; ++j) cols[j] = xs.column(j);
  PivotedQr qr(std::move(cols));
  Vector qty = y;
  qr.apply_qt(qty);
  auto sol = qr.solve(qty);
  return OlsResult{std::move(sol.coef), std::move(sol.present), qr.rank(), qr.dropped()};
}

/// Strict least squares; throws RankDeficient when any column is dropped.
inline Vector ols_fit(const Matrix& xs, const Vector& y) {
  OlsResult r = ols_solve(xs, y);
  if (r.rank < xs.cols()) throw RankDeficient(r.rank, r.dropped);
  return std::move(r.coef);
}

/// One draw from N(0, L * L^T): returns L * z with z standard normal.
inline Vector mvn_sample(const Matrix& chol_factor, RngStream& stream) {
  const std::size_t p = chol_factor.rows();
  if (chol_factor.cols() != p) throw DimensionError("mvn_sample: factor must be square");
  Vector z(p);
  for (auto& v : z) v = stream.normal();
  Vector out(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) out[i] = dot(chol_factor.row_ptr(i), z.data(), i + 1);
  return out;
}

}  // namespace sshdi
