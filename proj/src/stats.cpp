#include "rmtfeat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "rmtfeat/error.hpp"

namespace rmtfeat {

namespace {

// Continued fraction for I_x(a, b), modified Lentz. Converges quickly for
// x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 10000;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw Error("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // Symmetry I_x(a, b) = 1 - I_{1-x}(b, a) keeps the fraction in its fast regime.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_cdf(double x, double df1, double df2) {
  if (!(df1 > 0.0 && df2 > 0.0)) throw Error("F distribution needs positive degrees of freedom");
  if (std::isnan(x)) throw Error("F cdf of NaN");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double y = df1 * x / (df1 * x + df2);
  return incomplete_beta(df1 / 2.0, df2 / 2.0, y);
}

double f_survival(double x, double df1, double df2) {
  if (!(df1 > 0.0 && df2 > 0.0)) throw Error("F distribution needs positive degrees of freedom");
  if (std::isnan(x)) throw Error("F survival of NaN");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * x));
}

AnovaResult anova_oneway(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw Error("ANOVA needs at least 2 groups");
  std::size_t total = 0;
  double grand_sum = 0.0;
  AnovaResult r;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].size() < 2) {
      throw Error(fmt::format("ANOVA group {} has {} samples, needs at least 2", g, groups[g].size()));
    }
    for (double v : groups[g]) {
      if (!std::isfinite(v)) throw Error("ANOVA sample is not finite");
    }
    const double sum = std::accumulate(groups[g].begin(), groups[g].end(), 0.0);
    r.group_means.push_back(sum / static_cast<double>(groups[g].size()));
    grand_sum += sum;
    total += groups[g].size();
  }
  const double grand_mean = grand_sum / static_cast<double>(total);
  double ssb = 0.0;
  double ssw = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double dm = r.group_means[g] - grand_mean;
    ssb += static_cast<double>(groups[g].size()) * dm * dm;
    for (double v : groups[g]) ssw += (v - r.group_means[g]) * (v - r.group_means[g]);
  }
  r.df_between = groups.size() - 1;
  r.df_within = total - groups.size();
  // Sums of squares at rounding level relative to the data are treated as 0.
  double scale = 0.0;
  for (const auto& grp : groups)
    for (double v : grp) scale += (v - grand_mean) * (v - grand_mean);
  const double zero = 1e-24 * std::max(scale, 1e-300);
  if (ssw <= zero) {
    if (ssb <= zero) throw Error("ANOVA is undefined: all samples are equal");
    r.f_statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.zero_within_variance = true;
    return r;
  }
  if (ssb <= zero) ssb = 0.0;
  r.f_statistic = (ssb / static_cast<double>(r.df_between)) / (ssw / static_cast<double>(r.df_within));
  r.p_value = f_survival(r.f_statistic, static_cast<double>(r.df_between), static_cast<double>(r.df_within));
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  return r;
}

}  // namespace rmtfeat
