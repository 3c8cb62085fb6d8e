#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sshdi/datagen.hpp"
#include "sshdi/errors.hpp"
#include "sshdi/lasso.hpp"
#include "sshdi/matrix.hpp"
#include "sshdi/rng.hpp"

namespace sshdi {

/// Which variable-selection procedure runs on the selection half, plus its
/// tuning knobs. max_selected == 0 means the floor(n/4) default, resolved
/// against the selection half at use time.
struct SelectorConfig {
  enum class Method { LassoCv, LassoFixed, Sis };

  Method method = Method::LassoCv;
  std::size_t folds = 10;
  std::size_t grid_size = 100;
  double grid_ratio = 0.001;
  double lambda = 0.0;       // LassoFixed only
  std::size_t keep = 0;      // Sis only
  std::size_t max_selected = 0;

  static SelectorConfig lasso_cv(std::size_t folds = 10, std::size_t grid_size = 100,
                                 double grid_ratio = 0.001) {
    SelectorConfig c;
    c.method = Method::LassoCv;
    c.folds = folds;
    c.grid_size = grid_size;
    c.grid_ratio = grid_ratio;
    return c;
  }
  static SelectorConfig lasso_fixed(double lambda) {
    SelectorConfig c;
    c.method = Method::LassoFixed;
    c.lambda = lambda;
    return c;
  }
  static SelectorConfig sis(std::size_t keep) {
    SelectorConfig c;
    c.method = Method::Sis;
    c.keep = keep;
    return c;
  }

  void validate() const {
    switch (method) {
      case Method::LassoCv:
        if (folds < 2) throw ConfigError("selector: folds must be at least 2");
        if (grid_size < 2) throw ConfigError("selector: grid_size must be at least 2");
        if (!(grid_ratio > 0.0 && grid_ratio < 1.0))
          throw ConfigError("selector: grid_ratio must lie in (0, 1)");
        break;
      case Method::LassoFixed:
        if (!(lambda > 0.0)) throw ConfigError("selector: lambda must be positive");
        break;
      case Method::Sis:
        if (keep < 1) throw ConfigError("selector: keep must be at least 1");
        break;
    }
  }

  std::string tag() const {
    switch (method) {
      case Method::LassoCv: return "lasso_cv";
      case Method::LassoFixed: return "lasso_fixed";
      case Method::Sis: return "sis";
    }
    return "?";
  }

  std::size_t resolve_cap(std::size_t n_half_source) const {
    return max_selected > 0 ? max_selected : std::max<std::size_t>(1, n_half_source / 4);
  }
};

struct SelectedSet {
  std::vector<std::size_t> indices;  // sorted, distinct, 0-based
  std::optional<double> lambda_used;
  std::string method_tag;
};

namespace detail {

struct StandardizedDesign {
  ColMatrix x;       // centered, unit population sd columns
  Vector y;          // centered
  Vector col_mean;
  Vector col_sd;     // 0 marks a constant column (left centered, unscaled)
  double y_mean = 0.0;
};

inline StandardizedDesign standardize(const Matrix& x, const Vector& y) {
  const std::size_t n = x.rows(), p = x.cols();
  StandardizedDesign s;
  s.x = ColMatrix(n, p);
  s.col_mean.resize(p);
  s.col_sd.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x(i, j);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = x(i, j) - m;
      v += c * c;
    }
    const double sd = std::sqrt(v / static_cast<double>(n));
    s.col_mean[j] = m;
    s.col_sd[j] = sd;
    const double inv = sd > 0.0 ? 1.0 / sd : 1.0;
    for (std::size_t i = 0; i < n; ++i) s.x(i, j) = (x(i, j) - m) * inv;
  }
  s.y_mean = mean(y);
  s.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.y[i] = y[i] - s.y_mean;
  return s;
}

}  // namespace detail

/// Marginal screening: rank covariates by |corr(x_j, y)| and keep the top
/// `keep`; ties resolve to the lower index. Constant columns rank last.
inline SelectedSet sis_screen(const Matrix& x, const Vector& y, std::size_t keep) {
  const std::size_t n = x.rows(), p = x.cols();
  if (keep > p) throw ConfigError("sis_screen: keep exceeds p");
  if (y.size() != n) throw DimensionError("sis_screen: y length mismatch");

  const double ym = mean(y);
  double yv = 0.0;
  Vector yc(n);
  for (std::size_t i = 0; i < n; ++i) {
    yc[i] = y[i] - ym;
    yv += yc[i] * yc[i];
  }

  Vector score(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double xm = 0.0;
    for (std::size_t i = 0; i < n; ++i) xm += x(i, j);
    xm /= static_cast<double>(n);
    double xv = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = x(i, j) - xm;
      xv += c * c;
      cross += c * yc[i];
    }
    score[j] = (xv > 0.0 && yv > 0.0) ? std::abs(cross) / std::sqrt(xv * yv) : 0.0;
  }

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  SelectedSet out;
  out.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(out.indices.begin(), out.indices.end());
  out.method_tag = "sis";
  return out;
}

namespace detail {

/// Keep the `cap` largest-magnitude coefficients; ties go to the lower index.
inline std::vector<std::size_t> cap_by_magnitude(const std::vector<std::size_t>& indices,
                                                 const Vector& beta, std::size_t cap) {
  if (indices.size() <= cap) return indices;
  std::vector<std::size_t> kept = indices;
  std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(beta[a]) > std::abs(beta[b]);
  });
  kept.resize(cap);
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace detail

/// Run the configured selection procedure on the selection half.
/// Standardization is internal; returned indices refer to the original
/// columns. The result is truncated to the max_selected cap, keeping the
/// largest-|coefficient| entries (lasso) or the top-ranked ones (SIS).
inline SelectedSet select(const Dataset& d2, const SelectorConfig& config, RngStream& stream) {
  config.validate();
  const std::size_t n = d2.n(), p = d2.p();
  if (n == 0 || p == 0) throw DimensionError("select: empty selection half");
  const std::size_t cap = config.resolve_cap(n);

  if (config.method == SelectorConfig::Method::Sis) {
    // Capping keeps the top-ranked entries, so fold the cap into keep.
    return sis_screen(d2.x, d2.y, std::min({config.keep, cap, p}));
  }

  const auto std_design = detail::standardize(d2.x, d2.y);
  double lam = config.lambda;
  if (config.method == SelectorConfig::Method::LassoCv) {
    const double lmax = lambda_max(std_design.x, std_design.y);
    const auto grid = lambda_grid(lmax, config.grid_size, config.grid_ratio);
    lam = cv_select_lambda(std_design.x, std_design.y, std::min(config.folds, n), grid, stream);
  }
  const Vector beta = lasso_fit(std_design.x, std_design.y, lam);

  SelectedSet out;
  for (std::size_t j = 0; j < p; ++j)
    if (beta[j] != 0.0) out.indices.push_back(j);
  out.indices = detail::cap_by_magnitude(out.indices, beta, cap);
  out.lambda_used = lam;
  out.method_tag = config.tag();
  return out;
}

}  // namespace sshdi
