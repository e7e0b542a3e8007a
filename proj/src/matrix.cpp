#include "rmtfeat/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "rmtfeat/error.hpp"

namespace rmtfeat {

NonFiniteValue::NonFiniteValue(std::size_t row, std::size_t col)
    : Error("non-finite value at (" + std::to_string(row) + "," + std::to_string(col) + ")"),
      row_(row),
      col_(col) {}

ZeroVarianceChannel::ZeroVarianceChannel(std::size_t channel)
    : Error("channel " + std::to_string(channel) + " has zero variance"), channel_(channel) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw std::invalid_argument("Matrix: value count does not match shape");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::column_block(std::size_t first, std::size_t count) const {
  if (first + count > cols_) throw std::out_of_range("Matrix::column_block");
  Matrix out(rows_, count);
  for (std::size_t r = 0; r < rows_; ++r) {
    auto src = row(r).subspan(first, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

double Matrix::trace() const {
  double t = 0.0;
  const std::size_t n = std::min(rows_, cols_);
  for (std::size_t i = 0; i < n; ++i) t += (*this)(i, i);
  return t;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("multiply: shape mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix gram(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto ri = a.row(i);
    for (std::size_t j = 0; j <= i; ++j) {
      auto rj = a.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ri.size(); ++k) s += ri[k] * rj[k];
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("operator-: shape mismatch");
  }
  Matrix out = a;
  auto ov = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] -= bv[i];
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

}  // namespace rmtfeat
