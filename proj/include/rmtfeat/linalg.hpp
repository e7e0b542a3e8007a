#pragma once

#include <cstddef>
#include <vector>

#include "rmtfeat/ingest.hpp"
#include "rmtfeat/matrix.hpp"

namespace rmtfeat {

// PerSample divides W*W^T by the window length and puts unit-variance data on
// the Marchenko-Pastur support; PaperLiteral divides by the channel count.
enum class CovNormalization { PerSample, PaperLiteral };

struct CovarianceMatrix {
  Matrix data;  // symmetric N x N
  std::size_t delta_t{0};
  CovNormalization normalization{CovNormalization::PerSample};
};

struct EigenSpectrum {
  std::vector<double> eigenvalues;  // ascending
  std::size_t n{0};
  double c{0.0};  // N / delta_t; 0 when the spectrum did not come from a window
  bool trace_normalized{false};
  std::size_t clamped{0};  // tiny negative eigenvalues set to zero
};

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column j is the unit eigenvector of values[j]
};

// Row-wise z-scoring with the unbiased (dT - 1) variance.
// Throws ZeroVarianceChannel for a constant row.
WindowMatrix standardize(const WindowMatrix& w);

CovarianceMatrix sample_covariance(const WindowMatrix& w,
                                   CovNormalization normalization = CovNormalization::PerSample);

// Cyclic Jacobi eigensolver for a real symmetric matrix. Throws if the input
// is asymmetric beyond 1e-12 relative or fails to converge. With
// want_vectors=false the returned `vectors` is empty.
SymmetricEigen jacobi_eigen(const Matrix& a, bool want_vectors = true);

struct CovarianceEigen {
  EigenSpectrum spectrum;
  Matrix vectors;
};

// Spectrum of a covariance; eigenvalues in [-1e-10 * trace, 0) are clamped to
// zero, anything more negative is rejected.
CovarianceEigen eig_sym(const CovarianceMatrix& m, bool want_vectors = true);
EigenSpectrum eigen_spectrum(const CovarianceMatrix& m);

EigenSpectrum trace_normalize(const EigenSpectrum& s);

// U * diag(values) * U^T
Matrix reconstruct(const SymmetricEigen& e);

// B^{1/2} for a symmetric PSD B, through the eigendecomposition with the
// spectrum clamped at zero.
Matrix sqrt_psd(const Matrix& b);

}  // namespace rmtfeat
