#include <gtest/gtest.h>

#include <cmath>

#include "insightpilot/stats.hpp"

namespace st = insightpilot::stats;

namespace {

// Independent oracle: composite Simpson integration of the t density.
double t_density(double x, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  return c * std::pow(1 + x * x / df, -(df + 1) / 2);
}

double simpson(double (*f)(double, double), double a, double b, double arg, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a, arg) + f(b, arg);
  for (int i = 1; i < n; ++i) s += f(a + i * h, arg) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

double oracle_two_sided(double t, double df) { return 1.0 - 2.0 * simpson(t_density, 0.0, std::fabs(t), df); }

double normal_density(double x, double) { return std::exp(-x * x / 2) / std::sqrt(2 * M_PI); }

}  // namespace

TEST(Stats, TwoSidedTMatchesQuadrature) {
  for (double df : {1.0, 2.0, 3.5, 7.0, 18.0, 60.0}) {
    for (double t : {0.0, 0.3, 1.0, 2.0, 3.7, 6.0}) {
      EXPECT_NEAR(st::t_two_sided_p(t, df), oracle_two_sided(t, df), 1e-9) << "t=" << t << " df=" << df;
      EXPECT_DOUBLE_EQ(st::t_two_sided_p(-t, df), st::t_two_sided_p(t, df));
    }
  }
}

TEST(Stats, TTableCriticalValues) {
  // two-sided 5% critical values from standard tables
  EXPECT_NEAR(st::t_two_sided_p(12.706, 1), 0.05, 1e-4);
  EXPECT_NEAR(st::t_two_sided_p(2.228, 10), 0.05, 1e-4);
  EXPECT_NEAR(st::t_two_sided_p(2.086, 20), 0.05, 1e-4);
  EXPECT_NEAR(st::t_cdf(0.0, 5), 0.5, 1e-15);
}

TEST(Stats, DegenerateTInputs) {
  EXPECT_EQ(st::t_two_sided_p(INFINITY, 4), 0.0);
  EXPECT_EQ(st::t_two_sided_p(NAN, 4), 1.0);
  EXPECT_EQ(st::t_two_sided_p(1.0, 0.0), 1.0);
}

TEST(Stats, NormalTailMatchesQuadrature) {
  for (double z : {0.0, 0.5, 1.0, 1.96, 3.0}) {
    const double oracle = 0.5 - simpson(normal_density, 0.0, z, 0.0);
    EXPECT_NEAR(st::normal_upper_tail(z), oracle, 1e-10);
    EXPECT_NEAR(st::normal_cdf(-z), oracle, 1e-10);
  }
  EXPECT_EQ(st::normal_upper_tail(INFINITY), 0.0);
  EXPECT_EQ(st::normal_upper_tail(-INFINITY), 1.0);
}

TEST(Stats, ChiSquareTwoDfIsExponential) {
  for (double x : {0.1, 1.0, 4.0, 9.5}) EXPECT_NEAR(st::chi_square_upper_tail(x, 2), std::exp(-x / 2), 1e-12);
  EXPECT_EQ(st::chi_square_upper_tail(0.0, 3), 1.0);
  EXPECT_EQ(st::chi_square_upper_tail(INFINITY, 3), 0.0);
}

TEST(Stats, Clip01) {
  EXPECT_EQ(st::clip01(-0.2), 0.0);
  EXPECT_EQ(st::clip01(1.7), 1.0);
  EXPECT_EQ(st::clip01(NAN), 1.0);
  EXPECT_EQ(st::clip01(0.25), 0.25);
}

TEST(Stats, MomentsAndLineFit) {
  std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(st::mean(v), 5.0);
  EXPECT_NEAR(st::sample_variance(v), 32.0 / 7.0, 1e-12);
  EXPECT_EQ(st::sample_variance(std::vector<double>{3.0}), 0.0);
  EXPECT_TRUE(st::all_equal(std::vector<double>{1, 1, 1}));
  EXPECT_FALSE(st::all_equal(std::vector<double>{1, 2}));

  std::vector<double> x{0, 1, 2, 3, 4}, y{1, 3, 5, 7, 9};
  auto fit = st::ols(x, y);
  EXPECT_NEAR(fit.slope, 2.0, 1e-12);
  EXPECT_NEAR(fit.intercept, 1.0, 1e-12);
  EXPECT_NEAR(fit.sse, 0.0, 1e-20);
  EXPECT_NEAR(fit.sxx, 10.0, 1e-12);
}
