/*
 * matrix.hpp
 *
 * Dense row-major double matrix with the handful of products the MoE layer
 * needs. All reductions run in ascending index order.
 */
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "moelab/errors.hpp"

namespace moelab {

using Vector = std::vector<double>;

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

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// y = A x
Vector matvec(const Matrix& a, std::span<const double> x);

/// y = A^T x
Vector matvec_transposed(const Matrix& a, std::span<const double> x);

/// A += u v^T
void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v);

/// y += x
void add_to(std::span<double> y, std::span<const double> x);

/// y += s * x
void axpy(double s, std::span<const double> x, std::span<double> y);

double dot(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v) noexcept;

}  // namespace moelab
