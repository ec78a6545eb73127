#include "moelab/matrix.hpp"

#include <cmath>
#include <string>

namespace moelab {

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.cols())
    throw ShapeError("matvec: matrix has " + std::to_string(a.cols()) + " columns, vector has " +
                     std::to_string(x.size()) + " entries");
  Vector y(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) y[r] = dot(a.row(r), x);
  return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.rows())
    throw ShapeError("matvec_transposed: matrix has " + std::to_string(a.rows()) +
                     " rows, vector has " + std::to_string(x.size()) + " entries");
  Vector y(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) axpy(x[r], a.row(r), y);
  return y;
}

void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v) {
  if (u.size() != a.rows() || v.size() != a.cols()) throw ShapeError("add_outer: size mismatch");
  for (std::size_t r = 0; r < a.rows(); ++r) axpy(u[r], v, a.row(r));
}

void add_to(std::span<double> y, std::span<const double> x) {
  if (x.size() != y.size()) throw ShapeError("add_to: size mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
}

void axpy(double s, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ShapeError("axpy: size mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

bool all_finite(std::span<const double> v) noexcept {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace moelab
