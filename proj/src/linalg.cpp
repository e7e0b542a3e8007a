#include "rmtfeat/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "rmtfeat/error.hpp"

namespace rmtfeat {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kSymmetryTol = 1e-12;
constexpr double kOffDiagTol = 1e-12;
constexpr double kNegativeTol = 1e-10;

void check_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) throw Error("eigensolver needs a square matrix");
  const double scale = std::max(a.frobenius_norm(), 1e-300);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > kSymmetryTol * scale) {
        throw Error(fmt::format("matrix is not symmetric at ({},{})", i, j));
      }
    }
  }
}

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) s += 2.0 * a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

WindowMatrix standardize(const WindowMatrix& w) {
  const std::size_t t = w.data.cols();
  if (t < 2) throw Error("standardize needs at least 2 samples per channel");
  WindowMatrix out = w;
  for (std::size_t r = 0; r < w.data.rows(); ++r) {
    auto row = out.data.row(r);
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(t);
    double ss = 0.0;
    for (double& v : row) {
      v -= mean;
      ss += v * v;
    }
    const double sd = std::sqrt(ss / static_cast<double>(t - 1));
    // Constant rows leave only rounding residue after centring.
    if (sd == 0.0 || sd <= 1e-14 * std::abs(mean)) throw ZeroVarianceChannel(r);
    for (double& v : row) v /= sd;
  }
  return out;
}

CovarianceMatrix sample_covariance(const WindowMatrix& w, CovNormalization normalization) {
  const double denom = normalization == CovNormalization::PerSample
                           ? static_cast<double>(w.data.cols())
                           : static_cast<double>(w.data.rows());
  return {(1.0 / denom) * gram(w.data), w.data.cols(), normalization};
}

SymmetricEigen jacobi_eigen(const Matrix& input, bool want_vectors) {
  check_symmetric(input);
  const std::size_t n = input.rows();
  Matrix a = input;
  // Rows of vt are eigenvectors; rotating rows keeps the updates contiguous.
  Matrix vt = want_vectors ? Matrix::identity(n) : Matrix{};
  const double scale = input.frobenius_norm();

  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    if (off_diagonal_norm(a) <= kOffDiagTol * scale) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        auto rp = a.row(p);
        auto rq = a.row(q);
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = rp[k];
          const double akq = rq[k];
          rp[k] = c * akp - s * akq;
          rq[k] = s * akp + c * akq;
          a(k, p) = rp[k];
          a(k, q) = rq[k];
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        if (want_vectors) {
          auto vp = vt.row(p);
          auto vq = vt.row(q);
          for (std::size_t k = 0; k < n; ++k) {
            const double x = vp[k];
            const double y = vq[k];
            vp[k] = c * x - s * y;
            vq[k] = s * x + c * y;
          }
        }
      }
    }
  }
  if (sweep == kMaxSweeps) throw Error("Jacobi eigensolver did not converge");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymmetricEigen out;
  out.values.reserve(n);
  for (std::size_t i : order) out.values.push_back(a(i, i));
  if (want_vectors) {
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
      auto v = vt.row(order[j]);
      for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = v[k];
    }
  }
  return out;
}

CovarianceEigen eig_sym(const CovarianceMatrix& m, bool want_vectors) {
  SymmetricEigen e = jacobi_eigen(m.data, want_vectors);
  const double trace = m.data.trace();
  const double floor = -kNegativeTol * std::max(trace, 0.0);
  CovarianceEigen out;
  out.spectrum.n = m.data.rows();
  out.spectrum.c = m.delta_t ? static_cast<double>(m.data.rows()) / static_cast<double>(m.delta_t) : 0.0;
  for (double& v : e.values) {
    if (v < 0.0) {
      if (v < floor) throw Error(fmt::format("covariance has eigenvalue {} below tolerance", v));
      v = 0.0;
      ++out.spectrum.clamped;
    }
  }
  out.spectrum.eigenvalues = std::move(e.values);
  out.vectors = std::move(e.vectors);
  return out;
}

EigenSpectrum eigen_spectrum(const CovarianceMatrix& m) { return eig_sym(m, false).spectrum; }

EigenSpectrum trace_normalize(const EigenSpectrum& s) {
  const double total = std::accumulate(s.eigenvalues.begin(), s.eigenvalues.end(), 0.0);
  if (!(total > 0.0)) throw Error("cannot trace-normalize a spectrum with zero sum");
  EigenSpectrum out = s;
  for (double& v : out.eigenvalues) v = std::clamp(v / total, 0.0, 1.0);
  out.trace_normalized = true;
  return out;
}

Matrix reconstruct(const SymmetricEigen& e) {
  const std::size_t n = e.values.size();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return out;
}

Matrix sqrt_psd(const Matrix& b) {
  SymmetricEigen e = jacobi_eigen(b, true);
  for (double& v : e.values) v = std::sqrt(std::max(v, 0.0));
  return reconstruct(e);
}

}  // namespace rmtfeat
