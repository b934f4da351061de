#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mondrian {

struct KsTestResult {
  double statistic = 0.0;  // sup |F1 - F2|
  double p_value = 1.0;    // asymptotic two-sided p
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

/// Two-sample Kolmogorov-Smirnov test. With tied/discrete data the p-value
/// is conservative (biased high), which is the safe direction for an
/// equals-distribution check.
KsTestResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y ~ slope*x + intercept.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> values);
double sample_stddev(std::span<const double> values);
double median(std::vector<double> values);

}  // namespace mondrian
