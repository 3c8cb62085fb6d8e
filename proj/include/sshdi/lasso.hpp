#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "sshdi/errors.hpp"
#include "sshdi/matrix.hpp"
#include "sshdi/rng.hpp"

namespace sshdi {

struct LassoOptions {
  // Convergence: max coefficient change per sweep <= tol * (1 + max|beta|).
  double tol = 1e-8;
  std::size_t max_sweeps = 10000;
};

inline double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

/// Smallest penalty with an all-zero solution: max_j |x_j' y| / n.
inline double lambda_max(const ColMatrix& x, const Vector& y) {
  const std::size_t n = x.rows();
  double m = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j)
    m = std::max(m, std::abs(dot(x.col_ptr(j), y.data(), n)));
  return m / static_cast<double>(n);
}

/// Log-spaced grid from lmax down to ratio * lmax, largest first.
inline std::vector<double> lambda_grid(double lmax, std::size_t grid_size, double ratio) {
  if (grid_size < 2) throw ConfigError("lambda_grid: grid_size must be at least 2");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("lambda_grid: ratio must lie in (0, 1)");
  std::vector<double> grid(grid_size);
  grid[0] = lmax;
  const double step = std::log(ratio) / static_cast<double>(grid_size - 1);
  for (std::size_t t = 1; t < grid_size; ++t)
    grid[t] = lmax * std::exp(step * static_cast<double>(t));
  return grid;
}

namespace detail {

/// Coordinate-descent workspace reused across path points and CV folds.
/// Holds the residual vector and per-column scale x_j'x_j / n so subsets of
/// rows (whose columns are no longer exactly unit-scale) stay correct.
class CdWorkspace {
 public:
  CdWorkspace(const ColMatrix& x, const Vector& y) : x_(&x), n_(x.rows()), p_(x.cols()) {
    scale_.resize(p_);
    for (std::size_t j = 0; j < p_; ++j)
      scale_[j] = dot(x.col_ptr(j), x.col_ptr(j), n_) / static_cast<double>(n_);
    reset(y);
  }

  void reset(const Vector& y) {
    beta_.assign(p_, 0.0);
    residual_ = y;
  }

  void warm_start(const Vector& y, const Vector& beta0) {
    beta_ = beta0;
    residual_ = y;
    for (std::size_t j = 0; j < p_; ++j)
      if (beta_[j] != 0.0) axpy(-beta_[j], x_->col_ptr(j), residual_.data(), n_);
  }

  const Vector& beta() const { return beta_; }

  /// Solve at one lambda from the current state. Throws NonConvergence
  /// when the sweep budget runs out.
  void solve(double lambda, const LassoOptions& opt) {
    const double inv_n = 1.0 / static_cast<double>(n_);
    active_.clear();
    for (std::size_t j = 0; j < p_; ++j)
      if (beta_[j] != 0.0) active_.push_back(j);

    std::size_t sweeps = 0;
    bool full_pass = active_.empty();
    for (;;) {
      if (++sweeps > opt.max_sweeps)
        throw NonConvergence("lasso_fit: no convergence after " +
                             std::to_string(opt.max_sweeps) + " sweeps");
      double max_delta = 0.0;
      double max_beta = 0.0;
      if (full_pass) {
        active_.clear();
        for (std::size_t j = 0; j < p_; ++j) {
          update_coord(j, lambda, inv_n, max_delta);
          if (beta_[j] != 0.0) {
            active_.push_back(j);
            max_beta = std::max(max_beta, std::abs(beta_[j]));
          }
        }
      } else {
        for (std::size_t j : active_) {
          update_coord(j, lambda, inv_n, max_delta);
          max_beta = std::max(max_beta, std::abs(beta_[j]));
        }
      }
      const bool converged = max_delta <= opt.tol * (1.0 + max_beta);
      if (converged) {
        if (full_pass) return;  // full sweep found no violators and moved nothing
        full_pass = true;       // verify against the inactive coordinates
      } else {
        full_pass = false;
      }
    }
  }

 private:
  void update_coord(std::size_t j, double lambda, double inv_n, double& max_delta) {
    const double s = scale_[j];
    if (s <= 0.0) return;  // constant column in this row subset
    const double* xj = x_->col_ptr(j);
    const double old = beta_[j];
    const double rho = dot(xj, residual_.data(), n_) * inv_n + s * old;
    const double next = soft_threshold(rho, lambda) / s;
    if (next != old) {
      axpy(old - next, xj, residual_.data(), n_);
      beta_[j] = next;
      max_delta = std::max(max_delta, std::abs(next - old));
    }
  }

  const ColMatrix* x_;
  std::size_t n_, p_;
  Vector scale_;
  Vector beta_;
  Vector residual_;
  std::vector<std::size_t> active_;
};

}  // namespace detail

/// Minimize (1/2n) |y - x beta|^2 + lambda |beta|_1 by cyclic coordinate
/// descent; x is expected column-standardized and y centered (row subsets
/// of standardized data are handled via per-column scales).
inline Vector lasso_fit(const ColMatrix& x, const Vector& y, double lambda,
                        const Vector* warm = nullptr, const LassoOptions& opt = {}) {
  if (y.size() != x.rows()) throw DimensionError("lasso_fit: y length mismatch");
  if (!(lambda >= 0.0)) throw ConfigError("lasso_fit: lambda must be nonnegative");
  detail::CdWorkspace w(x, y);
  if (warm) w.warm_start(y, *warm);
  w.solve(lambda, opt);
  return w.beta();
}

/// Largest KKT residual of a candidate solution; a correct minimizer is
/// within solver tolerance of zero.
inline double kkt_violation(const ColMatrix& x, const Vector& y, const Vector& beta,
                            double lambda) {
  const std::size_t n = x.rows();
  Vector r = y;
  for (std::size_t j = 0; j < x.cols(); ++j)
    if (beta[j] != 0.0) axpy(-beta[j], x.col_ptr(j), r.data(), n);
  double worst = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    const double g = dot(x.col_ptr(j), r.data(), n) / static_cast<double>(n);
    if (beta[j] != 0.0)
      worst = std::max(worst, std::abs(g - lambda * (beta[j] > 0.0 ? 1.0 : -1.0)));
    else
      worst = std::max(worst, std::max(0.0, std::abs(g) - lambda));
  }
  return worst;
}

struct PathPoint {
  double lambda;
  Vector beta;
};

/// Warm-started solution path over a log-spaced grid from lambda_max down
/// to grid_ratio * lambda_max. The first entry is exactly zero.
inline std::vector<PathPoint> lasso_path(const ColMatrix& x, const Vector& y,
                                         std::size_t grid_size, double grid_ratio,
                                         const LassoOptions& opt = {}) {
  const auto grid = lambda_grid(lambda_max(x, y), grid_size, grid_ratio);
  std::vector<PathPoint> path;
  path.reserve(grid.size());
  detail::CdWorkspace w(x, y);
  for (double lambda : grid) {
    w.solve(lambda, opt);
    path.push_back({lambda, w.beta()});
  }
  return path;
}

/// Seeded fold assignment: a random permutation dealt round-robin, so fold
/// sizes differ by at most one.
inline std::vector<std::size_t> cv_fold_assignment(std::size_t n, std::size_t folds,
                                                   RngStream& stream) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(n - i));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % folds;
  return fold_of;
}

/// K-fold cross-validation over a fixed lambda grid (largest lambda
/// first). Returns the grid value minimizing the mean out-of-fold squared
/// prediction error; exact ties resolve to the larger lambda.
inline double cv_select_lambda(const ColMatrix& x, const Vector& y, std::size_t folds,
                               const std::vector<double>& grid, RngStream& stream,
                               std::vector<std::size_t>* fold_of_out = nullptr,
                               const LassoOptions& opt = {}) {
  const std::size_t n = x.rows(), p = x.cols();
  if (folds < 2) throw ConfigError("cv_select_lambda: folds must be at least 2");
  if (n < folds) throw ConfigError("cv_select_lambda: more folds than samples");
  if (grid.empty()) throw ConfigError("cv_select_lambda: empty grid");

  const auto fold_of = cv_fold_assignment(n, folds, stream);
  if (fold_of_out) *fold_of_out = fold_of;

  std::vector<double> sse(grid.size(), 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);

    ColMatrix xt(train.size(), p);
    Vector yt(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) {
      yt[r] = y[train[r]];
      for (std::size_t j = 0; j < p; ++j) xt(r, j) = x(train[r], j);
    }

    detail::CdWorkspace w(xt, yt);
    Vector pred(test.size());
    for (std::size_t t = 0; t < grid.size(); ++t) {
      w.solve(grid[t], opt);
      std::fill(pred.begin(), pred.end(), 0.0);
      const Vector& beta = w.beta();
      for (std::size_t j = 0; j < p; ++j) {
        if (beta[j] == 0.0) continue;
        const double* xj = x.col_ptr(j);
        for (std::size_t r = 0; r < test.size(); ++r) pred[r] += beta[j] * xj[test[r]];
      }
      for (std::size_t r = 0; r < test.size(); ++r) {
        const double e = y[test[r]] - pred[r];
        sse[t] += e * e;
      }
    }
  }

  // Grid is lambda-descending, so scanning with strict improvement keeps
  // the largest lambda on ties.
  std::size_t best = 0;
  for (std::size_t t = 1; t < grid.size(); ++t)
    if (sse[t] < sse[best]) best = t;
  return grid[best];
}

}  // namespace sshdi
