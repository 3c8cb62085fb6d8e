#pragma once

<
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "sshdi/datagen.hpp"
#include "sshdi/errors.hpp"
#include "sshdi/estimator.hpp"
#include "sshdi/inference.hpp"
#include "sshdi/parallel.hpp"

namespace sshdi {

/// Full description of one simulation scenario.
struct ScenarioConfig {
  std::size_t n = 200;
  std::size_t p = 500;
  CovarianceSpec covariance;
  std::size_t sparsity = 5;
  double coef_low = 0.5;
  double coef_high = 2.0;
  double noise_sd = 1.0;
  SelectorConfig selector;
  std::size_t b = 0;  // 0 -> n
  double alpha = 0.05;
  Adjustment adjustment = Adjustment::Bonferroni;
  std::size_t replicates = 200;
  std::uint64_t master_seed = 1;
  std::size_t workers = 0;  // 0 -> hardware

  std::size_t resolved_b() const { return b == 0 ? n : b; }

  void validate() const {
    if (n < 8) throw ConfigError("scenario: n must be at least 8");
    if (p < 1) throw ConfigError("scenario: p must be at least 1");
    covariance.validate();
    if (sparsity > p) throw ConfigError("scenario: sparsity exceeds p");
    if (coef_low > coef_high) throw ConfigError("scenario: coef_low exceeds coef_high");
    if (noise_sd < 0.0) throw ConfigError("scenario: noise_sd must be nonnegative");
    selector.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("scenario: alpha must lie in (0, 1)");
    if (replicates < 1) throw ConfigError("scenario: replicates must be at least 1");
  }
};

struct CoverageRow {
  std::optional<std::size_t> index;  // 0-based coordinate; empty for the noise-average row
  double beta_star = 0.0;
  double bias = 0.0;
  double cov_prob = 0.0;  // percent
};

struct CoverageReport {
  SimulationTruth truth;
  std::vector<CoverageRow> signal_rows;  // ascending index
  CoverageRow noise_row;
  // Two readings of the noise coverage: mean of per-coordinate coverages
  // and the pooled proportion over (coordinate, replicate) cells. With a
  // fixed replicate count they coincide; both are reported anyway.
  double noise_cov_mean_of_coords = 0.0;
  double noise_cov_pooled = 0.0;
  // Per-replicate noise-average bias: mean and sd, for Monte Carlo error
  // bounds on the noise bias.
  double noise_bias_replicate_sd = 0.0;
  std::size_t replicates = 0;
  std::size_t total_failed_resamples = 0;
  std::size_t total_rank_drops = 0;
  std::size_t variance_fallback_count = 0;
  double mean_selection_size = 0.0;
};

namespace detail {

// CI containment with a tiny absolute slack so exactly-degenerate
// intervals (noiseless data, zero variance) behave like their
// exact-arithmetic limit.
inline bool ci_covers(double lo, double hi, double target) {
  const double slack = 1e-9 * (1.0 + std::abs(target));
  return target >= lo - slack && target <= hi + slack;
}

}  // namespace detail

/// Monte Carlo coverage study: one fixed truth, `replicates` fresh
/// datasets, a full fit + variance + inference pass per replicate, and
/// per-coordinate bias / CI-coverage accumulation. Signal coordinates are
/// reported individually, noise coordinates as one averaged row.
///
/// Replicate r derives its own seed from (master_seed, r); within a
/// replicate the dataset uses stream 0 and the resamples streams 1..B, so
/// no stream is ever reused. Replicates run in parallel and are reduced in
/// replicate order.
inline CoverageReport coverage_experiment(const ScenarioConfig& scenario,
                                          const SelectorFn& selector) {
  scenario.validate();
  const std::size_t p = scenario.p;
  const std::size_t reps = scenario.replicates;
  const std::size_t big_b = scenario.resolved_b();

  RngStream truth_stream(scenario.master_seed, 0);
  const SimulationTruth truth = draw_truth(p, scenario.sparsity, scenario.coef_low,
                                           scenario.coef_high, truth_stream, scenario.noise_sd);
  const Vector beta_star = truth.dense_beta(p);

  struct ReplicateSummary {
    Vector bias;                 // beta_hat - beta_star
    std::vector<bool> covered;   // CI contains beta_star
    std::size_t failed_resamples = 0;
    std::size_t rank_drops = 0;
    std::size_t fallbacks = 0;
    double mean_selection = 0.0;
  };
  std::vector<ReplicateSummary> slots(reps);

  parallel_for(reps, scenario.workers, [&](std::size_t r) {
    const std::uint64_t seed_r = derive_seed(scenario.master_seed, r + 1);
    RngStream data_stream(seed_r, 0);
    const Dataset data =
        generate_dataset(scenario.n, p, scenario.covariance, truth, data_stream);
    const SSHDIFit fit = sshdi_fit(data, selector, big_b, seed_r, 1);
    const VarianceEstimate var = variance_estimate(fit);
    const InferenceTable table = infer(fit, var, scenario.alpha, scenario.adjustment);

    ReplicateSummary s;
    s.bias.resize(p);
    s.covered.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
      const auto& row = table.rows[j];
      s.bias[j] = row.estimate - beta_star[j];
      s.covered[j] = detail::ci_covers(row.ci_low, row.ci_high, beta_star[j]);
      if (row.variance_fallback) ++s.fallbacks;
    }
    s.failed_resamples = fit.diagnostics.failed_resamples;
    s.rank_drops = fit.diagnostics.total_rank_drops;
    double sel = 0.0;
    for (std::size_t sz : fit.diagnostics.selection_sizes) sel += static_cast<double>(sz);
    s.mean_selection = fit.b > 0 ? sel / static_cast<double>(fit.b) : 0.0;
    slots[r] = std::move(s);
  });

  // Replicate-ordered reduction.
  Vector bias_sum(p, 0.0);
  std::vector<std::size_t> cover_count(p, 0);
  Vector noise_bias_per_rep(reps, 0.0);
  CoverageReport report;
  report.truth = truth;
  report.replicates = reps;

  std::vector<bool> is_signal(p, false);
  for (std::size_t a : truth.active_set) is_signal[a] = true;
  const std::size_t noise_count = p - truth.active_set.size();

  double mean_sel_sum = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto& s = slots[r];
    double noise_bias = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      bias_sum[j] += s.bias[j];
      if (s.covered[j]) ++cover_count[j];
      if (!is_signal[j]) noise_bias += s.bias[j];
    }
    noise_bias_per_rep[r] = noise_count > 0 ? noise_bias / static_cast<double>(noise_count) : 0.0;
    report.total_failed_resamples += s.failed_resamples;
    report.total_rank_drops += s.rank_drops;
    report.variance_fallback_count += s.fallbacks;
    mean_sel_sum += s.mean_selection;
  }
  report.mean_selection_size = mean_sel_sum / static_cast<double>(reps);

  const double inv_reps = 1.0 / static_cast<double>(reps);
  for (std::size_t t = 0; t < truth.active_set.size(); ++t) {
    const std::size_t j = truth.active_set[t];
    CoverageRow row;
    row.index = j;
    row.beta_star = truth.coefficients[t];
    row.bias = bias_sum[j] * inv_reps;
    row.cov_prob = 100.0 * static_cast<double>(cover_count[j]) * inv_reps;
    report.signal_rows.push_back(row);
  }

  if (noise_count > 0) {
    double bias_acc = 0.0, cov_acc = 0.0;
    std::size_t pooled_hits = 0;
    for (std::size_t j = 0; j < p; ++j) {
      if (is_signal[j]) continue;
      bias_acc += bias_sum[j] * inv_reps;
      cov_acc += static_cast<double>(cover_count[j]) * inv_reps;
      pooled_hits += cover_count[j];
    }
    report.noise_row.beta_star = 0.0;
    report.noise_row.bias = bias_acc / static_cast<double>(noise_count);
    report.noise_cov_mean_of_coords = 100.0 * cov_acc / static_cast<double>(noise_count);
    report.noise_cov_pooled =
        100.0 * static_cast<double>(pooled_hits) / static_cast<double>(noise_count * reps);
    report.noise_row.cov_prob = report.noise_cov_mean_of_coords;

    const double nb_mean = mean(noise_bias_per_rep);
    double ss = 0.0;
    for (double v : noise_bias_per_rep) ss += (v - nb_mean) * (v - nb_mean);
    report.noise_bias_replicate_sd =
        reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
  }
  return report;
}

inline CoverageReport coverage_experiment(const ScenarioConfig& scenario) {
  return coverage_experiment(scenario, selector_from_config(scenario.selector));
}

}  // namespace sshdi
