#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace anisoperc {

// A Monte Carlo point estimate with its interval.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
  std::uint64_t n = 0;
  double level = 0.95;
  double lo = 0.0;
  double hi = 0.0;
  std::string tag;
};

inline double normal_quantile(double level) {
  static const boost::math::normal standard;
  return boost::math::quantile(standard, 0.5 + level / 2.0);
}

inline double chi_squared_sf(double x, double dof) {
  if (dof <= 0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), std::max(0.0, x)));
}

// Binomial proportion with a Wilson score interval.
inline Estimate proportion_estimate(std::uint64_t successes, std::uint64_t n, double level = 0.95,
                                    std::string tag = {}) {
  Estimate e;
  e.n = n;
  e.level = level;
  e.tag = std::move(tag);
  if (n == 0) {
    e.lo = 0.0;
    e.hi = 1.0;
    return e;
  }
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double z = normal_quantile(level);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (phat + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  e.value = phat;
  e.se = std::sqrt(phat * (1.0 - phat) / nn);
  e.lo = std::clamp(std::min(centre - half, phat), 0.0, 1.0);
  e.hi = std::clamp(std::max(centre + half, phat), 0.0, 1.0);
  return e;
}

// Sample mean from integer sums (exact, order independent) with a normal interval.
inline Estimate mean_estimate(long double sum, long double sum_sq, std::uint64_t n, double level = 0.95,
                              std::string tag = {}) {
  Estimate e;
  e.n = n;
  e.level = level;
  e.tag = std::move(tag);
  if (n == 0) return e;
  const long double nn = static_cast<long double>(n);
  const long double mean = sum / nn;
  const long double var = n > 1 ? std::max<long double>(0, (sum_sq - nn * mean * mean) / (nn - 1)) : 0;
  e.value = static_cast<double>(mean);
  e.se = static_cast<double>(std::sqrt(var / nn));
  const double z = normal_quantile(level);
  e.lo = e.value - z * e.se;
  e.hi = e.value + z * e.se;
  return e;
}

// Standardised difference of two independent proportions.
inline double two_proportion_z(const Estimate& a, const Estimate& b) {
  const double se = std::sqrt(a.se * a.se + b.se * b.se);
  if (se == 0.0) return a.value == b.value ? 0.0 : (a.value > b.value ? INFINITY : -INFINITY);
  return (a.value - b.value) / se;
}

}  // namespace anisoperc
