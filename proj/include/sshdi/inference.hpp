#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "sshdi/errors.hpp"
#include "sshdi/estimator.hpp"
#include "sshdi/normal.hpp"

namespace sshdi {

enum class Adjustment { None, Bonferroni };

inline std::string adjustment_name(Adjustment a) {
  return a == Adjustment::None ? "none" : "bonferroni";
}

inline Adjustment adjustment_from_name(const std::string& s) {
  if (s == "none") return Adjustment::None;
  if (s == "bonferroni") return Adjustment::Bonferroni;
  throw ConfigError("adjustment must be 'none' or 'bonferroni', got '" + s + "'");
}

struct InferenceRow {
  std::size_t index = 0;  // 0-based coordinate
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool zero_variance = false;      // se == 0; z by convention
  bool variance_fallback = false;  // bias-corrected variance was <= 0
};

struct InferenceTable {
  std::vector<InferenceRow> rows;  // coordinate order
  double alpha = 0.05;
  Adjustment adjustment = Adjustment::Bonferroni;
  std::size_t m = 0;  // number of tests
};

namespace detail {

inline InferenceRow make_row(std::size_t j, double estimate, double variance, double z_crit) {
  InferenceRow row;
  row.index = j;
  row.estimate = estimate;
  if (!(variance >= 0.0)) throw ConfigError("infer: negative variance at coordinate " +
                                            std::to_string(j));
  row.se = std::sqrt(variance);
  if (row.se > 0.0) {
    row.z = estimate / row.se;
    row.p_raw = two_sided_p(row.z);
  } else {
    // Zero-variance convention: a zero estimate carries no evidence, a
    // nonzero one is infinitely many of its (zero) standard errors away.
    row.zero_variance = true;
    if (estimate == 0.0) {
      row.z = 0.0;
      row.p_raw = 1.0;
    } else {
      row.z = estimate > 0.0 ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
      row.p_raw = 0.0;
    }
  }
  row.ci_low = estimate - z_crit * row.se;
  row.ci_high = estimate + z_crit * row.se;
  return row;
}

}  // namespace detail

/// Per-coordinate z-tests and confidence intervals for a smoothed fit.
/// CIs are estimate +- z_{1-alpha/2} * se; the adjustment applies to
/// p-values only (Bonferroni multiplies by the number of tests m = p and
/// clips at 1).
inline InferenceTable infer(const SSHDIFit& fit, const VarianceEstimate& variances, double alpha,
                            Adjustment adjustment) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("infer: alpha must lie in (0, 1)");
  if (variances.v_b.size() != fit.p) throw DimensionError("infer: variance length mismatch");

  InferenceTable table;
  table.alpha = alpha;
  table.adjustment = adjustment;
  table.m = fit.p;
  const double z_crit = normal_quantile(1.0 - alpha / 2.0);
  const double m = static_cast<double>(table.m);

  table.rows.reserve(fit.p);
  for (std::size_t j = 0; j < fit.p; ++j) {
    InferenceRow row = detail::make_row(j, fit.beta_hat[j], variances.v_b[j], z_crit);
    row.variance_fallback = variances.fallback[j];
    row.p_adjusted =
        adjustment == Adjustment::Bonferroni ? std::min(1.0, m * row.p_raw) : row.p_raw;
    table.rows.push_back(row);
  }
  return table;
}

/// Same tests from a plain variance vector (no fallback flags available).
inline InferenceTable infer(const SSHDIFit& fit, const Vector& variances, double alpha,
                            Adjustment adjustment) {
  VarianceEstimate est;
  est.v_b = variances;
  est.v_uncorrected = variances;
  est.fallback.assign(variances.size(), false);
  return infer(fit, est, alpha, adjustment);
}

}  // namespace sshdi
