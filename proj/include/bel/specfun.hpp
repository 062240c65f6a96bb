#pragma once

// Log-gamma, digamma and trigamma on the positive real axis.
//
// All three use the same scheme: shift the argument upward with the
// recurrence until it reaches kShiftThreshold, evaluate the asymptotic
// (Stirling-type) series there, then undo the shift. Arguments <= 0 or
// non-finite arguments throw std::domain_error; the Dirichlet code that
// calls these never goes below alpha = 1. ln_gamma switches to a Taylor
// series near its zeros at 1 and 2, where the shifted form cancels.

#include <cmath>
#include <iterator>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bel::specfun {

namespace detail {

inline constexpr double kShiftThreshold = 10.0;

inline void check_domain(double x, const char* fn) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw std::domain_error(std::string(fn) + ": argument must be finite and > 0, got " +
                            std::to_string(x));
  }
}

// zeta(k) for k = 2 .. 26
inline constexpr double kZeta[] = {
    1.6449340668482264365, 1.2020569031595942854, 1.0823232337111381915, 1.0369277551433699263,
    1.0173430619844491397, 1.0083492773819228268, 1.0040773561979443394, 1.0020083928260822144,
    1.0009945751278180853, 1.0004941886041194646, 1.0002460865533080483, 1.0001227133475784891,
    1.0000612481350587048, 1.0000305882363070205, 1.0000152822594086519, 1.0000076371976378998,
    1.0000038172932649998, 1.0000019082127165539, 1.0000009539620338728, 1.0000004769329867878,
    1.0000002384505027277, 1.0000001192199259653, 1.0000000596081890513, 1.0000000298035035147,
    1.0000000149015548284};

inline constexpr double kSeriesRadius = 0.2;

// ln Gamma(1 + t) = -gamma t + sum_k (-t)^k zeta(k) / k, |t| <= kSeriesRadius
inline double ln_gamma_1p(double t) {
  double acc = 0.0;
  for (int i = static_cast<int>(std::size(kZeta)) - 1; i >= 0; --i) acc = kZeta[i] / (i + 2) - t * acc;
  return t * (-std::numbers::egamma + t * acc);
}

}  // namespace detail

/// ln Gamma(x) for x > 0.
inline double ln_gamma(double x) {
  detail::check_domain(x, "ln_gamma");
  if (std::abs(x - 1.0) <= detail::kSeriesRadius) return detail::ln_gamma_1p(x - 1.0);
  if (std::abs(x - 2.0) <= detail::kSeriesRadius) return detail::ln_gamma_1p(x - 2.0) + std::log1p(x - 2.0);
  // Product of the shifted factors x (x+1) ... (x+n-1); at most ten of them,
  // so neither underflow (x >= tiny) nor overflow is possible here.
  double shift_product = 1.0;
  double z = x;
  while (z < detail::kShiftThreshold) {
    shift_product *= z;
    z += 1.0;
  }
  const double inv = 1.0 / z;
  const double inv2 = inv * inv;
  // Bernoulli-number coefficients B_{2n} / (2n (2n-1)).
  const double series =
      inv * (1.0 / 12.0 +
             inv2 * (-1.0 / 360.0 +
                     inv2 * (1.0 / 1260.0 +
                             inv2 * (-1.0 / 1680.0 +
                                     inv2 * (1.0 / 1188.0 +
                                             inv2 * (-691.0 / 360360.0 + inv2 * (1.0 / 156.0)))))));
  const double stirling =
      (z - 0.5) * std::log(z) - z + 0.5 * std::log(2.0 * std::numbers::pi) + series;
  return shift_product == 1.0 ? stirling : stirling - std::log(shift_product);
}

/// psi(x) = d/dx ln Gamma(x) for x > 0.
inline double digamma(double x) {
  detail::check_domain(x, "digamma");
  double shift = 0.0;
  double z = x;
  while (z < detail::kShiftThreshold) {
    shift += 1.0 / z;
    z += 1.0;
  }
  const double inv = 1.0 / z;
  const double inv2 = inv * inv;
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
  return std::log(z) - 0.5 * inv - series - shift;
}

/// psi'(x) for x > 0.
inline double trigamma(double x) {
  detail::check_domain(x, "trigamma");
  double shift = 0.0;
  double z = x;
  while (z < detail::kShiftThreshold) {
    shift += 1.0 / (z * z);
    z += 1.0;
  }
  const double inv = 1.0 / z;
  const double inv2 = inv * inv;
  const double series =
      inv * inv2 *
      (1.0 / 6.0 -
       inv2 * (1.0 / 30.0 -
               inv2 * (1.0 / 42.0 -
                       inv2 * (1.0 / 30.0 -
                               inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0 - inv2 * (7.0 / 6.0)))))));
  return inv + 0.5 * inv2 + series + shift;
}

/// Default special-function policy used by the loss templates. Substituting
/// another policy (e.g. a deliberately perturbed digamma) lets the
/// verification suites demonstrate that they catch faults.
struct Standard {
  static double ln_gamma(double x) { return specfun::ln_gamma(x); }
  static double digamma(double x) { return specfun::digamma(x); }
  static double trigamma(double x) { return specfun::trigamma(x); }
};

}  // namespace bel::specfun
