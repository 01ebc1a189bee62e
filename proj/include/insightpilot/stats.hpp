#pragma once

// Distribution tails and small descriptive helpers shared by the insight
// functions. All tails are returned clipped to [0, 1].

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace insightpilot::stats {

inline double clip01(double p) {
  if (std::isnan(p)) return 1.0;
  return std::clamp(p, 0.0, 1.0);
}

/// P(Z > z) for a standard normal Z.
inline double normal_upper_tail(double z) {
  if (std::isinf(z)) return z > 0 ? 0.0 : 1.0;
  return clip01(0.5 * std::erfc(z / std::sqrt(2.0)));
}

/// Standard normal CDF.
inline double normal_cdf(double z) { return 1.0 - normal_upper_tail(z); }

/// Two-sided p-value of a Student-t statistic with `df` degrees of freedom.
/// Uses the exact CDF (regularized incomplete beta) for every df.
inline double t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  if (!(df > 0)) return 1.0;
  boost::math::students_t dist(df);
  return clip01(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

/// Student-t CDF, exposed for tests against published tables.
inline double t_cdf(double t, double df) {
  boost::math::students_t dist(df);
  return boost::math::cdf(dist, t);
}

/// Upper tail P(X > x) of a chi-square variable.
inline double chi_square_upper_tail(double x, double df) {
  if (x <= 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  boost::math::chi_squared dist(df);
  return clip01(boost::math::cdf(boost::math::complement(dist, x)));
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample variance (n - 1 denominator); 0 for fewer than two points.
inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

inline bool all_equal(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double sse = 0.0;  ///< residual sum of squares
  double sxx = 0.0;
  double syy = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LineFit ols(std::span<const double> x, std::span<const double> y) {
  LineFit fit;
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    fit.sxx += (x[i] - mx) * (x[i] - mx);
    fit.syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  fit.slope = fit.sxx > 0 ? sxy / fit.sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    fit.sse += e * e;
  }
  return fit;
}

}  // namespace insightpilot::stats
