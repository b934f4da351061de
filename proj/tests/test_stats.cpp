#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mondrian/rng.hpp"
#include "mondrian/stats.hpp"

using namespace mondrian;

TEST_CASE("two-sample KS statistic on a hand example") {
  const KsTestResult result =
      ks_two_sample({1.0, 2.0, 3.0}, {1.5, 2.5, 3.5});
  CHECK(result.statistic == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("identical samples have zero statistic and p = 1") {
  const std::vector<double> sample{0.3, 0.1, 0.9, 0.5};
  const KsTestResult result = ks_two_sample(sample, sample);
  CHECK(result.statistic == 0.0);
  CHECK(result.p_value == 1.0);
}

TEST_CASE("same-distribution samples are not rejected") {
  RngStream rng(5, 0);
  std::vector<double> a(3000), b(3000);
  for (double& v : a) v = rng.next_uniform();
  for (double& v : b) v = rng.next_uniform();
  const KsTestResult result = ks_two_sample(a, b);
  CHECK(result.p_value > 0.01);
}

TEST_CASE("shifted samples are strongly rejected") {
  RngStream rng(6, 0);
  std::vector<double> a(3000), b(3000);
  for (double& v : a) v = rng.next_uniform();
  for (double& v : b) v = rng.next_uniform() + 0.2;
  const KsTestResult result = ks_two_sample(a, b);
  CHECK(result.p_value < 1e-6);
}

TEST_CASE("discrete ties are handled") {
  std::vector<double> a, b;
  RngStream rng(7, 0);
  for (int i = 0; i < 2000; ++i) {
    a.push_back(std::floor(rng.next_uniform() * 5));
    b.push_back(std::floor(rng.next_uniform() * 5));
  }
  const KsTestResult same = ks_two_sample(a, b);
  CHECK(same.p_value > 0.01);
  for (double& v : b) v += 1.0;
  const KsTestResult shifted = ks_two_sample(a, b);
  CHECK(shifted.p_value < 1e-10);
}

TEST_CASE("empty samples are rejected") {
  CHECK_THROWS_AS(ks_two_sample({}, {1.0}), std::invalid_argument);
}

TEST_CASE("least squares on an exact line") {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> y{3.0, 5.0, 7.0, 9.0};
  const LinearFit fit = fit_line(x, y);
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
  CHECK(fit.r_squared == doctest::Approx(1.0));
}

TEST_CASE("least squares r-squared drops with noise") {
  RngStream rng(8, 0);
  std::vector<double> x, y;
  for (int i = 0; i < 200; ++i) {
    x.push_back(static_cast<double>(i));
    y.push_back(0.5 * i + 40.0 * (rng.next_uniform() - 0.5));
  }
  const LinearFit fit = fit_line(x, y);
  CHECK(fit.r_squared < 1.0);
  CHECK(fit.r_squared > 0.5);
  CHECK(fit.slope == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("summary helpers") {
  const std::vector<double> values{1.0, 2.0, 3.0, 4.0};
  CHECK(mean(values) == doctest::Approx(2.5));
  CHECK(sample_stddev(values) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(median({5.0, 1.0, 3.0}) == 3.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
}
