#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sshdi/errors.hpp"

namespace sshdi {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const double& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

  Vector column(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Dense column-major matrix; columns are contiguous, which is the layout
/// the coordinate-descent and screening loops want.
class ColMatrix {
 public:
  ColMatrix() = default;
  ColMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  explicit ColMatrix(const Matrix& m) : ColMatrix(m.rows(), m.cols()) {
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) (*this)(i, j) = m(i, j);
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  const double& operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  double* col_ptr(std::size_t j) { return data_.data() + j * rows_; }
  const double* col_ptr(std::size_t j) const { return data_.data() + j * rows_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double dot(const Vector& a, const Vector& b) {
  return dot(a.data(), b.data(), a.size());
}

/// y += alpha * x
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline double max_abs(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double x : m.data()) r = std::max(r, std::abs(x));
  return r;
}

inline Vector matvec(const Matrix& a, const Vector& x) {
  if (x.size() != a.cols()) throw DimensionError("matvec: size mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row_ptr(i), x.data(), a.cols());
  return y;
}

inline double mean(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace sshdi
