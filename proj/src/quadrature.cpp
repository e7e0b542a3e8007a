#include "rmtfeat/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <queue>
#include <shared_mutex>
#include <utility>

namespace rmtfeat {

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence.
std::pair<double, double> legendre(std::size_t n, double x) {
  double p0 = 1.0;
  double p1 = x;
  for (std::size_t k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
    p0 = p1;
    p1 = pk;
  }
  return {p1, static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0)};
}

GaussLegendreRule build_rule(std::size_t n) {
  if (n == 1) return {{0.0}, {2.0}};
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = legendre(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(n, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

// Kronrod 15-point abscissae/weights with the embedded Gauss 7-point weights.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double lo;
  double hi;
  double value;
  double error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment kronrod(const std::function<double(double)>& f, double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = f(center);
  double gauss = fc * kWg[3];
  double kron = fc * kWgk[7];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double sum = f(center - dx) + f(center + dx);
    kron += kWgk[j] * sum;
    if (j % 2 == 1) gauss += kWg[j / 2] * sum;
  }
  return {lo, hi, kron * half, std::abs((kron - gauss) * half)};
}

}  // namespace

std::shared_ptr<const GaussLegendreRule> gauss_legendre(std::size_t n) {
  static std::shared_mutex mu;
  static std::map<std::size_t, std::shared_ptr<const GaussLegendreRule>> cache;
  {
    std::shared_lock lock(mu);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
  }
  auto rule = std::make_shared<const GaussLegendreRule>(build_rule(n));
  std::unique_lock lock(mu);
  return cache.emplace(n, std::move(rule)).first->second;
}

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                                    double abs_tol, double rel_tol, std::size_t max_intervals) {
  std::priority_queue<Segment> heap;
  Segment first = kronrod(f, lo, hi);
  double value = first.value;
  double error = first.error;
  heap.push(first);
  while (error > std::max(abs_tol, rel_tol * std::abs(value)) && heap.size() < max_intervals) {
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    const Segment left = kronrod(f, worst.lo, mid);
    const Segment right = kronrod(f, mid, worst.hi);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed the drift of the incremental updates.
  value = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  return {value, error, error <= std::max(abs_tol, rel_tol * std::abs(value))};
}

}  // namespace rmtfeat
