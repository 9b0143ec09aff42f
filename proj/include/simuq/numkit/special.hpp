#pragma once

#include <cmath>
#include <numbers>

#include "simuq/errors.hpp"

namespace simuq {

namespace detail {

/// Continued-fraction kernel for the incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr double eps = 3e-16;
  constexpr double fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double inc_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw config_error("InvalidSize", "inc_beta requires a > 0 and b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// P(X <= k) for X ~ Binomial(n, p), via the incomplete-beta identity.
inline double binomial_cdf(int k, int n, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  return inc_beta(static_cast<double>(n - k), static_cast<double>(k + 1),
                  1.0 - p);
}

/// CDF on [0, pi] of the density proportional to sin(phi)^p (p >= 0): the
/// distribution of a polar angle of a uniform direction in dimension p + 2.
/// Uses F(phi) = I_{sin^2 phi}((p+1)/2, 1/2) / 2 on [0, pi/2] and symmetry.
inline double sin_power_cdf(double p, double phi) {
  if (phi <= 0.0) return 0.0;
  if (phi >= std::numbers::pi_v<double>) return 1.0;
  const double s = std::sin(phi);
  const double half = 0.5 * inc_beta(0.5 * (p + 1.0), 0.5, s * s);
  return phi <= 0.5 * std::numbers::pi_v<double> ? half : 1.0 - half;
}

/// Inverse of sin_power_cdf in phi, by bisection (fixed 80 halvings, i.e.
/// resolution ~ pi * 2^-80: exact to the last double bit, deterministic).
inline double sin_power_quantile(double p, double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return std::numbers::pi_v<double>;
  double lo = 0.0, hi = std::numbers::pi_v<double>;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sin_power_cdf(p, mid) < u)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace simuq
