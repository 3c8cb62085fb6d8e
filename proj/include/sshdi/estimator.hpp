#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sshdi/datagen.hpp"
#include "sshdi/errors.hpp"
#include "sshdi/linalg.hpp"
#include "sshdi/matrix.hpp"
#include "sshdi/parallel.hpp"
#include "sshdi/rng.hpp"
#include "sshdi/selection.hpp"

namespace sshdi {

/// A half/half partition of {0..n-1}: the estimation half gets exactly
/// floor(n/2) observations, the selection half the rest.
struct SplitPlan {
  std::vector<std::size_t> d1;  // estimation half, sorted
  std::vector<std::size_t> d2;  // selection half, sorted
};

/// Uniformly random split plan.
inline SplitPlan draw_split_plan(std::size_t n, RngStream& stream) {
  const std::size_t n1 = n / 2;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n1; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  SplitPlan plan;
  plan.d1.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n1));
  plan.d2.assign(idx.begin() + static_cast<std::ptrdiff_t>(n1), idx.end());
  std::sort(plan.d1.begin(), plan.d1.end());
  std::sort(plan.d2.begin(), plan.d2.end());
  return plan;
}

/// Output of one split: per-coordinate partial-regression estimates on the
/// estimation half, given the set selected on the other half.
struct OneSplitResult {
  Vector beta_tilde;            // length p; absent coordinates are 0
  std::vector<bool> present;    // false where rank handling dropped the coordinate
  double intercept = 0.0;
  bool intercept_present = true;
  SelectedSet selected;
  std::vector<bool> membership;  // length n, true = estimation half
  std::size_t rank_drop_count = 0;
};

/// Pluggable selection stage; receives the selection half and the
/// resample's stream (already advanced past the split draw).
using SelectorFn = std::function<SelectedSet(const Dataset& d2, RngStream& stream)>;

inline SelectorFn selector_from_config(const SelectorConfig& config) {
  return [config](const Dataset& d2, RngStream& stream) { return select(d2, config, stream); };
}

/// Partial-regression stage of a single split with the plan and selection
/// fixed. For every coordinate j the response on the estimation half is
/// regressed (with intercept) on {j} union selected; beta_tilde[j] is the
/// coefficient of j in that fit. Coordinates inside the selected set share
/// one regression. The design shares its QR factorization across the p
/// fits: the selected block is factored once with column pivoting and each
/// outside coordinate contributes one appended column.
inline OneSplitResult one_split_with_selection(const Dataset& data, const SplitPlan& plan,
                                               SelectedSet selected) {
  const std::size_t n = data.n(), p = data.p();
  const std::size_t n1 = plan.d1.size();
  std::vector<std::size_t> s = selected.indices;
  if (s.size() + 2 >= n1)
    throw SelectionTooLarge("one_split: selected " + std::to_string(s.size()) +
                            " covariates, estimation half of " + std::to_string(n1) +
                            " cannot fit the partial regressions");

  // Base design on the estimation half: intercept followed by the selected
  // columns in index order.
  std::vector<Vector> base(1 + s.size(), Vector(n1));
  for (std::size_t i = 0; i < n1; ++i) base[0][i] = 1.0;
  for (std::size_t t = 0; t < s.size(); ++t)
    for (std::size_t i = 0; i < n1; ++i) base[1 + t][i] = data.x(plan.d1[i], s[t]);
  Vector y1(n1);
  for (std::size_t i = 0; i < n1; ++i) y1[i] = data.y[plan.d1[i]];

  PivotedQr qr(std::move(base));
  Vector qty = y1;
  qr.apply_qt(qty);
  const auto shared = qr.solve(qty);

  OneSplitResult out;
  out.beta_tilde.assign(p, 0.0);
  out.present.assign(p, true);
  out.selected = std::move(selected);
  out.intercept = shared.coef[0];
  out.intercept_present = shared.present[0];

  std::vector<bool> in_s(p, false);
  for (std::size_t t = 0; t < s.size(); ++t) {
    in_s[s[t]] = true;
    out.beta_tilde[s[t]] = shared.coef[1 + t];
    out.present[s[t]] = shared.present[1 + t];
  }

  Vector col(n1);
  for (std::size_t j = 0; j < p; ++j) {
    if (in_s[j]) continue;
    for (std::size_t i = 0; i < n1; ++i) col[i] = data.x(plan.d1[i], j);
    double coef = 0.0;
    if (qr.append_coefficient(col, qty, &coef)) {
      out.beta_tilde[j] = coef;
    } else {
      out.present[j] = false;
    }
  }
  out.rank_drop_count = static_cast<std::size_t>(
      std::count(out.present.begin(), out.present.end(), false));

  out.membership.assign(n, false);
  for (std::size_t i : plan.d1) out.membership[i] = true;
  return out;
}

/// One-split estimate: draw a random half/half split, select on one half,
/// run the partial regressions on the other.
inline OneSplitResult one_split(const Dataset& data, const SelectorFn& selector,
                                RngStream& stream) {
  const std::size_t n = data.n();
  if (n < 8) throw DimensionError("one_split: need n >= 8");
  if (data.p() < 1) throw DimensionError("one_split: need p >= 1");

  const SplitPlan plan = draw_split_plan(n, stream);
  Dataset d2;
  d2.x = Matrix(plan.d2.size(), data.p());
  d2.y.resize(plan.d2.size());
  for (std::size_t r = 0; r < plan.d2.size(); ++r) {
    d2.y[r] = data.y[plan.d2[r]];
    std::copy(data.x.row_ptr(plan.d2[r]), data.x.row_ptr(plan.d2[r]) + data.p(),
              d2.x.row_ptr(r));
  }
  SelectedSet s = selector(d2, stream);
  return one_split_with_selection(data, plan, std::move(s));
}

inline OneSplitResult one_split(const Dataset& data, const SelectorConfig& config,
                                RngStream& stream) {
  return one_split(data, selector_from_config(config), stream);
}

struct FitDiagnostics {
  std::vector<std::size_t> selection_sizes;  // per successful resample
  std::vector<double> lambdas_used;          // NaN where the method has none
  std::size_t total_rank_drops = 0;
  std::size_t requested_resamples = 0;
  std::size_t failed_resamples = 0;
  std::vector<std::string> failure_messages;
};

/// Smoothed estimate over B random splits plus everything the variance
/// estimator needs later (per-resample coefficients and half memberships).
struct SSHDIFit {
  Vector beta_hat;
  double intercept_hat = 0.0;
  std::vector<OneSplitResult> resamples;  // successful resamples, stream order
  std::size_t b = 0;                      // number of successful resamples
  std::size_t n = 0;
  std::size_t p = 0;
  FitDiagnostics diagnostics;
};

/// Run one_split over streams (master_seed, 1..b) and average the
/// estimates coordinate-wise. Resamples execute on any number of workers;
/// results land in pre-assigned slots and are reduced in stream order, so
/// the fit is bit-identical for a fixed master_seed regardless of worker
/// count. Failed resamples are dropped (and reported); the run aborts if
/// more than 5% fail.
inline SSHDIFit sshdi_fit(const Dataset& data, const SelectorFn& selector, std::size_t b,
                          std::uint64_t master_seed, std::size_t workers = 1) {
  if (b < 1) throw ConfigError("sshdi_fit: b must be at least 1");
  const std::size_t n = data.n(), p = data.p();

  std::vector<std::optional<OneSplitResult>> slots(b);
  std::vector<std::string> failures(b);
  parallel_for(b, workers, [&](std::size_t i) {
    RngStream stream(master_seed, static_cast<std::uint64_t>(i) + 1);
    try {
      slots[i] = one_split(data, selector, stream);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  SSHDIFit fit;
  fit.n = n;
  fit.p = p;
  fit.diagnostics.requested_resamples = b;
  for (std::size_t i = 0; i < b; ++i) {
    if (slots[i]) {
      fit.resamples.push_back(std::move(*slots[i]));
    } else {
      ++fit.diagnostics.failed_resamples;
      fit.diagnostics.failure_messages.push_back("resample " + std::to_string(i + 1) + ": " +
                                                 failures[i]);
    }
  }
  fit.b = fit.resamples.size();
  if (static_cast<double>(fit.diagnostics.failed_resamples) > 0.05 * static_cast<double>(b))
    throw RunAborted("sshdi_fit: " + std::to_string(fit.diagnostics.failed_resamples) + " of " +
                     std::to_string(b) + " resamples failed (threshold 5%); first failure: " +
                     (fit.diagnostics.failure_messages.empty()
                          ? std::string("?")
                          : fit.diagnostics.failure_messages.front()));
  if (fit.b == 0) throw RunAborted("sshdi_fit: every resample failed");

  // Index-ordered reduction; this fixes the floating-point summation order.
  fit.beta_hat.assign(p, 0.0);
  double intercept_sum = 0.0;
  for (const auto& r : fit.resamples) {
    for (std::size_t j = 0; j < p; ++j) fit.beta_hat[j] += r.beta_tilde[j];
    intercept_sum += r.intercept;
    fit.diagnostics.selection_sizes.push_back(r.selected.indices.size());
    fit.diagnostics.lambdas_used.push_back(
        r.selected.lambda_used ? *r.selected.lambda_used : std::nan(""));
    fit.diagnostics.total_rank_drops += r.rank_drop_count;
  }
  const double inv_b = 1.0 / static_cast<double>(fit.b);
  for (std::size_t j = 0; j < p; ++j) fit.beta_hat[j] *= inv_b;
  fit.intercept_hat = intercept_sum * inv_b;
  return fit;
}

inline SSHDIFit sshdi_fit(const Dataset& data, const SelectorConfig& config, std::size_t b,
                          std::uint64_t master_seed, std::size_t workers = 1) {
  return sshdi_fit(data, selector_from_config(config), b, master_seed, workers);
}

/// Model-free variance estimates for a smoothed fit.
struct VarianceEstimate {
  Vector v_b;               // final per-coordinate variance (after fallback)
  Vector v_uncorrected;     // membership-covariance estimate before bias correction
  std::vector<bool> fallback;  // true where the corrected value was <= 0
  double intercept_v_b = 0.0;
  double intercept_v_uncorrected = 0.0;
  bool intercept_fallback = false;
};

/// Variance of each smoothed coefficient from the covariance between
/// estimation-half membership indicators and the per-resample estimates:
///
///   cov_ij = (1/B) sum_b (J_bi - Jbar_i) (beta_tilde_j^b - beta_hat_j)
///   V_j    = 4 (n-1)/n * sum_i cov_ij^2
///   V_j^B  = V_j - (n/B^2) sum_b (beta_tilde_j^b - beta_hat_j)^2
///
/// where J_bi marks observation i's membership in resample b's estimation
/// half. A nonpositive corrected value falls back to the uncorrected V_j
/// with the coordinate flagged. The intercept is handled alongside the p
/// coordinates but reported separately.
inline VarianceEstimate variance_estimate(const SSHDIFit& fit) {
  const std::size_t big_b = fit.b, n = fit.n, p = fit.p;
  if (big_b < 2) throw ConfigError("variance_estimate: need at least 2 resamples");

  const double inv_b = 1.0 / static_cast<double>(big_b);
  const std::size_t cols = p + 1;  // coordinate deviations plus intercept in the last slot

  // Centered membership indicators, resample-major.
  std::vector<double> jc(big_b * n);
  for (std::size_t i = 0; i < n; ++i) {
    double jbar = 0.0;
    for (std::size_t b2 = 0; b2 < big_b; ++b2)
      jbar += fit.resamples[b2].membership[i] ? 1.0 : 0.0;
    jbar *= inv_b;
    for (std::size_t b2 = 0; b2 < big_b; ++b2)
      jc[b2 * n + i] = (fit.resamples[b2].membership[i] ? 1.0 : 0.0) - jbar;
  }

  // Centered estimates, resample-major.
  std::vector<double> delta(big_b * cols);
  bool any_deviation = false;
  for (std::size_t b2 = 0; b2 < big_b; ++b2) {
    const auto& r = fit.resamples[b2];
    double* row = delta.data() + b2 * cols;
    for (std::size_t j = 0; j < p; ++j) {
      row[j] = r.beta_tilde[j] - fit.beta_hat[j];
      if (row[j] != 0.0) any_deviation = true;
    }
    row[p] = r.intercept - fit.intercept_hat;
    if (row[p] != 0.0) any_deviation = true;
  }
  if (!any_deviation)
    throw DegenerateResamples(
        "variance_estimate: every resample produced the identical estimate; "
        "the variance is identically zero (was the selector stubbed?)");

  // cov = (1/B) Jc^T Delta, accumulated row-block by row-block so the inner
  // loop stays contiguous.
  std::vector<double> cov(n * cols, 0.0);
  for (std::size_t b2 = 0; b2 < big_b; ++b2) {
    const double* jrow = jc.data() + b2 * n;
    const double* drow = delta.data() + b2 * cols;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = jrow[i];
      if (w == 0.0) continue;
      axpy(w, drow, cov.data() + i * cols, cols);
    }
  }

  const double v_scale = 4.0 * static_cast<double>(n - 1) / static_cast<double>(n);
  const double corr_scale = static_cast<double>(n) * inv_b * inv_b;

  Vector v(cols, 0.0), corr(cols, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* crow = cov.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      const double c = crow[j] * inv_b;
      v[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < cols; ++j) v[j] *= v_scale;
  for (std::size_t b2 = 0; b2 < big_b; ++b2) {
    const double* drow = delta.data() + b2 * cols;
    for (std::size_t j = 0; j < cols; ++j) corr[j] += drow[j] * drow[j];
  }

  VarianceEstimate est;
  est.v_b.resize(p);
  est.v_uncorrected.resize(p);
  est.fallback.assign(p, false);
  for (std::size_t j = 0; j < cols; ++j) {
    const double uncorrected = v[j];
    const double corrected = uncorrected - corr_scale * corr[j];
    const bool fall = corrected <= 0.0;
    const double final_v = fall ? uncorrected : corrected;
    if (j < p) {
      est.v_uncorrected[j] = uncorrected;
      est.v_b[j] = final_v;
      est.fallback[j] = fall;
    } else {
      est.intercept_v_uncorrected = uncorrected;
      est.intercept_v_b = final_v;
      est.intercept_fallback = fall;
    }
  }
  return est;
}

}  // namespace sshdi
