#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sshdi {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Cholesky input had a nonpositive pivot.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// Cholesky input was not symmetric within tolerance.
class NotSymmetric : public Error {
 public:
  using Error::Error;
};

/// Least-squares design did not have full column rank.
/// Carries the detected rank and the dropped column indices.
class RankDeficient : public Error {
 public:
  RankDeficient(std::size_t rank, std::vector<std::size_t> dropped)
      : Error(message(rank, dropped)), rank_(rank), dropped_(std::move(dropped)) {}

  std::size_t rank() const { return rank_; }
  const std::vector<std::size_t>& dropped_columns() const { return dropped_; }

 private:
  static std::string message(std::size_t rank, const std::vector<std::size_t>& dropped) {
    std::string s = "rank-deficient design: detected rank " + std::to_string(rank) +
                    ", dropped columns {";
    for (std::size_t i = 0; i < dropped.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(dropped[i]);
    }
    s += "}";
    return s;
  }

  std::size_t rank_;
  std::vector<std::size_t> dropped_;
};

/// Coordinate descent did not converge within the sweep budget.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// The selected set is too large for the estimation half.
class SelectionTooLarge : public Error {
 public:
  using Error::Error;
};

/// Every resample produced the identical coefficient vector and the
/// variance estimate is identically zero; almost certainly a stubbed or
/// misconfigured selector.
class DegenerateResamples : public Error {
 public:
  using Error::Error;
};

/// Configuration file or flag error, with a field-level message.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// CSV ingestion error, with row/column location where applicable.
class IngestError : public Error {
 public:
  using Error::Error;
};

/// Input too small for the procedure.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// More than the tolerated fraction of resamples failed.
class RunAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace sshdi
