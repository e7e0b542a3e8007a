#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rmtfeat/linalg.hpp"

namespace rmtfeat {

// Marchenko-Pastur law for aspect ratio c = N / T in (0, 1):
// rho_c(x) = sqrt((b - x)(x - a)) / (2 pi c x) on [a, b] = [(1 - sqrt c)^2, (1 + sqrt c)^2].
struct MPLaw {
  double c{0.0};
  double a{0.0};
  double b{0.0};

  static MPLaw from_ratio(double c);
  static MPLaw from_dimensions(std::size_t n, std::size_t t);
  double center() const { return 1.0 + c; }          // (a + b) / 2
  double half_width() const { return 2.0 * std::sqrt(c); }  // (b - a) / 2
};

double mp_density(const MPLaw& law, double lambda);
double mp_cdf(const MPLaw& law, double lambda);

// Kolmogorov-Smirnov distance sup |ESD(x) - F_c(x)|.
double esd_ks_distance(std::span<const double> eigenvalues, const MPLaw& law);
// Same, after checking the spectrum came from a window with the law's c.
double esd_ks_distance(const EigenSpectrum& spec, const MPLaw& law);

enum class TestFunctionKind { Lrt, Wasserstein, Nagao, VonNeumannEntropy, Identity, Constant, Tabulated };

// Scalar function applied to each eigenvalue of a spectrum.
class TestFunction {
 public:
  static TestFunction lrt() { return TestFunction(TestFunctionKind::Lrt); }                // x - log x - 1
  static TestFunction wasserstein() { return TestFunction(TestFunctionKind::Wasserstein); }  // x - 2 sqrt x + 1
  static TestFunction nagao() { return TestFunction(TestFunctionKind::Nagao); }              // (x - 1)^2
  static TestFunction von_neumann_entropy() { return TestFunction(TestFunctionKind::VonNeumannEntropy); }  // -x log x
  static TestFunction identity() { return TestFunction(TestFunctionKind::Identity); }
  static TestFunction constant() { return TestFunction(TestFunctionKind::Constant); }
  // Piecewise-linear through (xs[i], ys[i]); xs strictly increasing. Values
  // outside [xs.front(), xs.back()] are an error.
  static TestFunction tabulated(std::vector<double> xs, std::vector<double> ys);

  // Accepts lrt, wasserstein, nagao, vnentropy, identity, constant.
  static TestFunction parse(std::string_view name);

  TestFunctionKind kind() const { return kind_; }
  std::string name() const;

  double operator()(double x) const;
  double derivative(double x) const;

 private:
  explicit TestFunction(TestFunctionKind kind) : kind_(kind) {}

  struct Table {
    std::vector<double> xs;
    std::vector<double> ys;
  };
  TestFunctionKind kind_;
  std::shared_ptr<const Table> table_;
};

// Eigenvalues are floored here before log-type test functions are evaluated.
inline constexpr double kEigenvalueFloor = 1e-12;

struct LESFeature {
  double value{0.0};
  TestFunctionKind test_function{TestFunctionKind::Identity};
  std::size_t n{0};
  bool normalized_by_n{false};
  std::size_t floored{0};  // eigenvalues raised to kEigenvalueFloor
  std::size_t window_index{0};
  std::string subject_id;
  std::optional<std::string> label;
};

// sum_j phi(lambda_j), divided by n when normalized_by_n.
// VonNeumannEntropy needs a trace-normalized spectrum and uses 0 log 0 = 0.
LESFeature les(const EigenSpectrum& spec, const TestFunction& phi, bool normalized_by_n = false);

// Limit of n^-1 * LES: the integral of phi against the M-P density.
double les_lln_limit(const TestFunction& phi, const MPLaw& law);

struct CLTVarianceParams {
  double c{0.5};
  double k4{0.0};  // fourth cumulant E[x^4] - 3 of the entries
  std::size_t quadrature_points{128};
};

// Asymptotic variance of the centred, unnormalized LES. The edge
// singularities go away under lambda = (1 + c) + 2 sqrt(c) sin(theta); the
// theta integrals use tensor Gauss-Legendre, doubled until the relative change
// is below 1e-6.
double clt_variance(const TestFunction& phi, const CLTVarianceParams& params);

// -sum p_i log_base p_i with 0 log 0 = 0.
double shannon_entropy(std::span<const double> p, double base = std::numbers::e);

double von_neumann_entropy(const CovarianceMatrix& m);

}  // namespace rmtfeat
