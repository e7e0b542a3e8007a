#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rmtfeat {

// Dense row-major real matrix. Rows are contiguous, so a channel of a
// recording (or a row of a covariance) is a span without copying.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  Matrix transpose() const;
  // Columns [first, first + count) as a new matrix.
  Matrix column_block(std::size_t first, std::size_t count) const;

  double trace() const;
  double frobenius_norm() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_{0};
  std::size_t cols_{0};
  std::vector<double> values_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
// a * a^T, exploiting symmetry of the result.
Matrix gram(const Matrix& a);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

}  // namespace rmtfeat
