#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace rmtfeat {

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1], ascending
  std::vector<double> weights;
};

// n-point rule, computed once per n and cached; safe for concurrent readers.
std::shared_ptr<const GaussLegendreRule> gauss_legendre(std::size_t n);

struct QuadratureResult {
  double value{0.0};
  double error_estimate{0.0};
  bool converged{false};
};

// Adaptive Gauss-Kronrod (7/15) on [lo, hi] with bisection of the worst
// interval until |error| <= max(abs_tol, rel_tol * |value|).
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                                    double abs_tol = 1e-13, double rel_tol = 1e-12,
                                    std::size_t max_intervals = 2000);

}  // namespace rmtfeat
