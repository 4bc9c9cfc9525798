#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rfattn {

/// Standard normal CDF. erfc-based, accurate in both tails.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * std::numbers::sqrt2_v<double> / 2.0);
}

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

namespace detail {

// Acklam's rational approximation for the inverse normal CDF
// (|relative error| < 1.15e-9 on its own), valid for p in (0, 0.5].
inline double inverse_normal_cdf_estimate(double p) {
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Inverse standard normal CDF. Rational initializer refined by one Halley
/// step against the erfc CDF; absolute error well under 1e-9 across
/// p in [1e-12, 1-1e-12].
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw std::domain_error("inverse_normal_cdf: p must lie in (0,1)");
  // Work on the lower half; 1-p is exact for p >= 0.5.
  if (p > 0.5) return -inverse_normal_cdf(1.0 - p);
  if (p == 0.5) return 0.0;

  double x = detail::inverse_normal_cdf_estimate(p);
  const double err = normal_cdf(x) - p;
  constexpr double sqrt_2pi = 2.50662827463100050242;
  const double u = err * sqrt_2pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace rfattn
