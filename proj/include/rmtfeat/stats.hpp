#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rmtfeat {

struct AnovaResult {
  double f_statistic{0.0};
  std::size_t df_between{0};
  std::size_t df_within{0};
  double p_value{1.0};
  std::vector<double> group_means;
  // Set when every group is constant but the means differ: F is infinite and
  // p is reported as 0.
  bool zero_within_variance{false};
};

// Classical one-way ANOVA: F = (SSB / (k - 1)) / (SSW / (n - k)).
AnovaResult anova_oneway(std::span<const std::vector<double>> groups);

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

// CDF of the F(df1, df2) distribution.
double f_cdf(double x, double df1, double df2);
// 1 - f_cdf, evaluated directly so small p-values keep their precision.
double f_survival(double x, double df1, double df2);

}  // namespace rmtfeat
