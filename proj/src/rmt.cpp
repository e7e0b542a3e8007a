#include "rmtfeat/rmt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "rmtfeat/error.hpp"
#include "rmtfeat/quadrature.hpp"

namespace rmtfeat {

namespace {

constexpr double kPi = std::numbers::pi;

// M-P mass element in theta, where lambda = center + half_width * sin(theta):
// rho(lambda) d lambda = 2 cos^2(theta) / (pi lambda) d theta.
double mp_theta_weight(const MPLaw& law, double theta) {
  const double lambda = law.center() + law.half_width() * std::sin(theta);
  const double cs = std::cos(theta);
  return 2.0 * cs * cs / (kPi * lambda);
}

}  // namespace

MPLaw MPLaw::from_ratio(double c) {
  if (!(c > 0.0 && c < 1.0)) {
    throw Error(fmt::format("Marchenko-Pastur law needs 0 < c < 1, got c = {}", c));
  }
  const double r = std::sqrt(c);
  return {c, (1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)};
}

MPLaw MPLaw::from_dimensions(std::size_t n, std::size_t t) {
  return from_ratio(static_cast<double>(n) / static_cast<double>(t));
}

double mp_density(const MPLaw& law, double lambda) {
  if (lambda <= law.a || lambda >= law.b) return 0.0;
  return std::sqrt((law.b - lambda) * (lambda - law.a)) / (2.0 * kPi * law.c * lambda);
}

double mp_cdf(const MPLaw& law, double lambda) {
  if (lambda <= law.a) return 0.0;
  if (lambda >= law.b) return 1.0;
  const double s = std::clamp((lambda - law.center()) / law.half_width(), -1.0, 1.0);
  const double upper = std::asin(s);
  const auto r = integrate_adaptive([&](double th) { return mp_theta_weight(law, th); }, -kPi / 2.0,
                                    upper, 1e-14, 1e-13);
  return std::clamp(r.value, 0.0, 1.0);
}

double esd_ks_distance(std::span<const double> eigenvalues, const MPLaw& law) {
  if (eigenvalues.empty()) throw Error("empty spectrum");
  std::vector<double> x(eigenvalues.begin(), eigenvalues.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = mp_cdf(law, x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double esd_ks_distance(const EigenSpectrum& spec, const MPLaw& law) {
  if (spec.trace_normalized) throw Error("KS comparison needs an unnormalized spectrum");
  if (std::abs(spec.c - law.c) > 1e-9 * law.c) {
    throw Error(fmt::format("spectrum has c = {} but law has c = {}", spec.c, law.c));
  }
  return esd_ks_distance(spec.eigenvalues, law);
}

// ---- test functions ------------------------------------------------------

TestFunction TestFunction::tabulated(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() < 2 || xs.size() != ys.size()) {
    throw Error("tabulated test function needs >= 2 matching (x, y) pairs");
  }
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) throw Error("tabulated test function x must be strictly increasing");
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw Error("tabulated test function is not finite");
  }
  TestFunction f(TestFunctionKind::Tabulated);
  f.table_ = std::make_shared<const Table>(Table{std::move(xs), std::move(ys)});
  return f;
}

TestFunction TestFunction::parse(std::string_view name) {
  if (name == "lrt") return lrt();
  if (name == "wasserstein") return wasserstein();
  if (name == "nagao") return nagao();
  if (name == "vnentropy") return von_neumann_entropy();
  if (name == "identity") return identity();
  if (name == "constant") return constant();
  throw Error(fmt::format("unknown test function '{}'", name));
}

std::string TestFunction::name() const {
  switch (kind_) {
    case TestFunctionKind::Lrt: return "lrt";
    case TestFunctionKind::Wasserstein: return "wasserstein";
    case TestFunctionKind::Nagao: return "nagao";
    case TestFunctionKind::VonNeumannEntropy: return "vnentropy";
    case TestFunctionKind::Identity: return "identity";
    case TestFunctionKind::Constant: return "constant";
    case TestFunctionKind::Tabulated: return "tabulated";
  }
  return "unknown";
}

double TestFunction::operator()(double x) const {
  switch (kind_) {
    case TestFunctionKind::Lrt: return x - std::log(x) - 1.0;
    case TestFunctionKind::Wasserstein: return x - 2.0 * std::sqrt(x) + 1.0;
    case TestFunctionKind::Nagao: return (x - 1.0) * (x - 1.0);
    case TestFunctionKind::VonNeumannEntropy: return x == 0.0 ? 0.0 : -x * std::log(x);
    case TestFunctionKind::Identity: return x;
    case TestFunctionKind::Constant: return 1.0;
    case TestFunctionKind::Tabulated: {
      const auto& xs = table_->xs;
      const auto& ys = table_->ys;
      if (x < xs.front() || x > xs.back()) {
        throw Error(fmt::format("{} is outside the tabulated range [{}, {}]", x, xs.front(), xs.back()));
      }
      const auto it = std::upper_bound(xs.begin(), xs.end(), x);
      const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - xs.begin()), xs.size() - 1);
      const std::size_t lo = hi - 1;
      const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
      return ys[lo] + w * (ys[hi] - ys[lo]);
    }
  }
  return 0.0;
}

double TestFunction::derivative(double x) const {
  switch (kind_) {
    case TestFunctionKind::Lrt: return 1.0 - 1.0 / x;
    case TestFunctionKind::Wasserstein: return 1.0 - 1.0 / std::sqrt(x);
    case TestFunctionKind::Nagao: return 2.0 * (x - 1.0);
    case TestFunctionKind::VonNeumannEntropy: return -std::log(x) - 1.0;
    case TestFunctionKind::Identity: return 1.0;
    case TestFunctionKind::Constant: return 0.0;
    case TestFunctionKind::Tabulated: {
      const auto& xs = table_->xs;
      const auto& ys = table_->ys;
      if (x < xs.front() || x > xs.back()) {
        throw Error(fmt::format("{} is outside the tabulated range [{}, {}]", x, xs.front(), xs.back()));
      }
      const auto it = std::upper_bound(xs.begin(), xs.end(), x);
      const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - xs.begin()), xs.size() - 1);
      return (ys[hi] - ys[hi - 1]) / (xs[hi] - xs[hi - 1]);
    }
  }
  return 0.0;
}

// ---- linear eigenvalue statistics ---------------------------------------

LESFeature les(const EigenSpectrum& spec, const TestFunction& phi, bool normalized_by_n) {
  if (spec.eigenvalues.empty()) throw Error("LES of an empty spectrum");
  const bool entropy = phi.kind() == TestFunctionKind::VonNeumannEntropy;
  if (entropy && !spec.trace_normalized) {
    throw Error("von Neumann entropy LES needs a trace-normalized spectrum");
  }
  const bool log_type = phi.kind() == TestFunctionKind::Lrt;
  LESFeature out;
  out.test_function = phi.kind();
  out.n = spec.eigenvalues.size();
  out.normalized_by_n = normalized_by_n;
  double sum = 0.0;
  for (double lambda : spec.eigenvalues) {
    if (lambda < 0.0) throw Error(fmt::format("negative eigenvalue {} in LES", lambda));
    if (log_type && lambda < kEigenvalueFloor) {
      lambda = kEigenvalueFloor;
      ++out.floored;
    }
    sum += phi(lambda);
  }
  if (!std::isfinite(sum)) throw Error("LES is not finite");
  out.value = normalized_by_n ? sum / static_cast<double>(out.n) : sum;
  return out;
}

double les_lln_limit(const TestFunction& phi, const MPLaw& law) {
  const auto integrand = [&](double th) {
    const double lambda = law.center() + law.half_width() * std::sin(th);
    const double v = phi(lambda) * mp_theta_weight(law, th);
    if (!std::isfinite(v)) throw Error("LES limit integrand diverges on the M-P support");
    return v;
  };
  const auto r = integrate_adaptive(integrand, -kPi / 2.0, kPi / 2.0, 1e-13, 1e-12, 4000);
  if (!r.converged) throw Error("LES limit quadrature did not converge");
  return r.value;
}

namespace {

double clt_variance_at(const TestFunction& phi, double c, double k4, std::size_t points) {
  const auto rule = gauss_legendre(points);
  const double center = 1.0 + c;
  const double half_width = 2.0 * std::sqrt(c);
  std::vector<double> theta(points), w(points), lambda(points), f(points), df(points), s(points);
  for (std::size_t i = 0; i < points; ++i) {
    theta[i] = 0.5 * kPi * rule->nodes[i];
    w[i] = 0.5 * kPi * rule->weights[i];
    s[i] = std::sin(theta[i]);
    lambda[i] = center + half_width * s[i];
    f[i] = phi(lambda[i]);
    df[i] = phi.derivative(lambda[i]);
  }
  // (lambda1 - center)(lambda2 - center) = 4c sin(theta1) sin(theta2), and
  // d lambda / sqrt(4c - (lambda - center)^2) = d theta.
  double double_integral = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < points; ++j) {
      const double q = i == j ? df[i] : (f[i] - f[j]) / (lambda[i] - lambda[j]);
      row += w[j] * q * q * (4.0 * c * (1.0 - s[i] * s[j]));
    }
    double_integral += w[i] * row;
  }
  double single = 0.0;
  for (std::size_t i = 0; i < points; ++i) single += w[i] * f[i] * half_width * s[i];
  return double_integral / (2.0 * kPi * kPi) + k4 / (4.0 * c * kPi * kPi) * single * single;
}

}  // namespace

double clt_variance(const TestFunction& phi, const CLTVarianceParams& params) {
  if (!(params.c > 0.0 && params.c <= 1.0)) {
    throw Error(fmt::format("CLT variance needs 0 < c <= 1, got {}", params.c));
  }
  if (params.quadrature_points < 32) throw Error("CLT variance needs at least 32 quadrature points");
  constexpr std::size_t kMaxPoints = 4096;
  std::size_t points = params.quadrature_points;
  double prev = clt_variance_at(phi, params.c, params.k4, points);
  while (points * 2 <= kMaxPoints) {
    points *= 2;
    const double next = clt_variance_at(phi, params.c, params.k4, points);
    if (!std::isfinite(next)) throw Error("CLT variance integrand is not finite");
    if (std::abs(next - prev) <= 1e-6 * std::abs(next) + 1e-14) return std::max(next, 0.0);
    prev = next;
  }
  throw Error("CLT variance quadrature did not converge");
}

// ---- entropy -------------------------------------------------------------

double shannon_entropy(std::span<const double> p, double base) {
  if (!(base > 0.0) || base == 1.0) throw Error("entropy base must be positive and not 1");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw Error(fmt::format("probability {} is negative", v));
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(fmt::format("probabilities sum to {}", total));
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h / std::log(base);
}

double von_neumann_entropy(const CovarianceMatrix& m) {
  const EigenSpectrum spec = trace_normalize(eigen_spectrum(m));
  return les(spec, TestFunction::von_neumann_entropy()).value;
}

}  // namespace rmtfeat
