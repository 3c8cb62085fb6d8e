#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sshdi/errors.hpp"
#include "sshdi/linalg.hpp"
#include "sshdi/matrix.hpp"
#include "sshdi/rng.hpp"

namespace sshdi {

enum class CovarianceKind { Identity, Ar1, CompoundSymmetry };

struct CovarianceSpec {
  CovarianceKind kind = CovarianceKind::Identity;
  double rho = 0.0;

  static CovarianceSpec identity() { return {CovarianceKind::Identity, 0.0}; }
  static CovarianceSpec ar1(double rho) { return {CovarianceKind::Ar1, rho}; }
  static CovarianceSpec compound_symmetry(double rho) {
    return {CovarianceKind::CompoundSymmetry, rho};
  }

  void validate() const {
    switch (kind) {
      case CovarianceKind::Identity:
        break;
      case CovarianceKind::Ar1:
        if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("ar1 rho must lie in (0, 1)");
        break;
      case CovarianceKind::CompoundSymmetry:
        if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("cs rho must lie in [0, 1)");
        break;
    }
  }

  std::string name() const {
    switch (kind) {
      case CovarianceKind::Identity: return "identity";
      case CovarianceKind::Ar1: return "ar1";
      case CovarianceKind::CompoundSymmetry: return "cs";
    }
    return "?";
  }
};

/// The sparse ground truth a simulated dataset was generated from.
struct SimulationTruth {
  std::vector<std::size_t> active_set;  // sorted, distinct, 0-based
  Vector coefficients;                  // aligned with active_set
  double noise_sd = 1.0;

  /// Dense coefficient vector of length p.
  Vector dense_beta(std::size_t p) const {
    Vector beta(p, 0.0);
    for (std::size_t t = 0; t < active_set.size(); ++t) beta[active_set[t]] = coefficients[t];
    return beta;
  }
};

struct Dataset {
  Matrix x;
  Vector y;
  std::optional<SimulationTruth> truth;

  std::size_t n() const { return x.rows(); }
  std::size_t p() const { return x.cols(); }
};

/// Covariance matrix for the covariate rows: identity, AR(1) with entries
/// rho^|j-k|, or compound symmetry with unit diagonal and constant
/// off-diagonal rho.
inline Matrix build_covariance(const CovarianceSpec& spec, std::size_t p) {
  if (p < 1) throw ConfigError("build_covariance: p must be at least 1");
  spec.validate();
  Matrix sigma(p, p, 0.0);
  switch (spec.kind) {
    case CovarianceKind::Identity:
      sigma = Matrix::identity(p);
      break;
    case CovarianceKind::Ar1:
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k < p; ++k)
          sigma(j, k) = std::pow(spec.rho, std::abs(static_cast<double>(j) - static_cast<double>(k)));
      break;
    case CovarianceKind::CompoundSymmetry:
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k < p; ++k) sigma(j, k) = j == k ? 1.0 : spec.rho;
      break;
  }
  return sigma;
}

/// Draw a sparse truth: a uniform random size-`sparsity` subset of
/// {0..p-1} with coefficients uniform on [coef_low, coef_high]. Drawn once
/// and then held fixed across Monte Carlo replicates.
inline SimulationTruth draw_truth(std::size_t p, std::size_t sparsity, double coef_low,
                                  double coef_high, RngStream& stream, double noise_sd = 1.0) {
  if (sparsity > p) throw ConfigError("draw_truth: sparsity exceeds p");
  if (coef_low > coef_high) throw ConfigError("draw_truth: coef_low exceeds coef_high");

  // Partial Fisher-Yates: the first `sparsity` entries are a uniform subset.
  std::vector<std::size_t> idx(p);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < sparsity; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(p - i));
    std::swap(idx[i], idx[j]);
  }
  SimulationTruth truth;
  truth.active_set.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(sparsity));
  std::sort(truth.active_set.begin(), truth.active_set.end());
  truth.coefficients.resize(sparsity);
  for (auto& c : truth.coefficients) c = stream.uniform(coef_low, coef_high);
  truth.noise_sd = noise_sd;
  return truth;
}

/// Simulate (X, y): rows of X are i.i.d. mean-zero normal with the given
/// covariance, y = X * beta_star + noise_sd * eps with eps standard normal.
inline Dataset generate_dataset(std::size_t n, std::size_t p, const CovarianceSpec& spec,
                                const SimulationTruth& truth, RngStream& stream) {
  if (n < 2) throw ConfigError("generate_dataset: n must be at least 2");
  for (std::size_t a : truth.active_set)
    if (a >= p) throw ConfigError("generate_dataset: truth index out of range");

  const Matrix chol = cholesky(build_covariance(spec, p));
  Dataset d;
  d.x = Matrix(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    Vector row = mvn_sample(chol, stream);
    std::copy(row.begin(), row.end(), d.x.row_ptr(i));
  }
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double signal = 0.0;
    for (std::size_t t = 0; t < truth.active_set.size(); ++t)
      signal += d.x(i, truth.active_set[t]) * truth.coefficients[t];
    d.y[i] = signal + truth.noise_sd * stream.normal();
  }
  d.truth = truth;
  return d;
}

}  // namespace sshdi
