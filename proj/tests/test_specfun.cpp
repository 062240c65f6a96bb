#include <gtest/gtest.h>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "bel/rng.hpp"
#include "bel/specfun.hpp"

using namespace bel::specfun;

namespace {

double rel_err(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

}  // namespace

TEST(LnGamma, KnownValues) {
  EXPECT_EQ(ln_gamma(1.0), 0.0);
  EXPECT_NEAR(ln_gamma(2.0), 0.0, 1e-15);
  EXPECT_NEAR(ln_gamma(5.0), std::log(24.0), 1e-14);
  EXPECT_NEAR(ln_gamma(5.0), 3.1780538303, 1e-10);
  EXPECT_NEAR(ln_gamma(0.5), 0.5 * std::log(std::numbers::pi), 1e-14);
  EXPECT_NEAR(ln_gamma(0.5), 0.5723649429, 1e-10);
}

TEST(LnGamma, MatchesBoostAcrossRange) {
  bel::Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 20000; ++i) {
    // log-uniform over [1e-3, 1e6]
    const double x = std::pow(10.0, rng.uniform(-3.0, 6.0));
    worst = std::max(worst, rel_err(ln_gamma(x), boost::math::lgamma(x)));
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Digamma, KnownValues) {
  constexpr double euler = 0.57721566490153286;
  EXPECT_NEAR(digamma(1.0), -euler, 1e-15);
  EXPECT_NEAR(digamma(2.0), 1.0 - euler, 1e-15);
  EXPECT_NEAR(digamma(2.0), 0.4227843351, 1e-10);
  EXPECT_NEAR(digamma(4.0) - digamma(2.0), 0.5 + 1.0 / 3.0, 1e-15);
}

TEST(Digamma, MatchesBoost) {
  bel::Rng rng(2);
  for (int i = 0; i < 20000; ++i) {
    const double x = std::pow(10.0, rng.uniform(-3.0, 6.0));
    const double want = boost::math::digamma(x);
    ASSERT_LE(std::abs(digamma(x) - want), 1e-13 * std::max(1.0, std::abs(want))) << "x=" << x;
  }
}

TEST(Trigamma, KnownValues) {
  const double z2 = std::numbers::pi * std::numbers::pi / 6.0;
  EXPECT_NEAR(trigamma(1.0), z2, 1e-14);
  EXPECT_NEAR(trigamma(1.0), 1.6449340668, 1e-10);
  EXPECT_NEAR(trigamma(2.0), z2 - 1.0, 1e-14);
  EXPECT_NEAR(trigamma(100.0), 0.01, 0.01 * 0.01);
}

TEST(Trigamma, MatchesBoost) {
  bel::Rng rng(3);
  for (int i = 0; i < 20000; ++i) {
    const double x = std::pow(10.0, rng.uniform(-3.0, 6.0));
    const double want = boost::math::trigamma(x);
    ASSERT_LE(std::abs(trigamma(x) - want), 1e-13 * want) << "x=" << x;
  }
}

TEST(Specfun, Recurrences) {
  bel::Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.uniform(0.0, 1000.0);
    if (x == 0.0) continue;
    const double d1 = digamma(x + 1.0), d0 = digamma(x) + 1.0 / x;
    ASSERT_LE(std::abs(d1 - d0), 1e-10 * std::max(std::abs(d1), 1.0)) << "x=" << x;
    const double t1 = trigamma(x + 1.0), t0 = trigamma(x) - 1.0 / (x * x);
    ASSERT_LE(std::abs(t1 - t0), 1e-10 * std::max(std::abs(t1), std::abs(trigamma(x)) * 1e-6)) << "x=" << x;
    const double g1 = ln_gamma(x + 1.0), g0 = ln_gamma(x) + std::log(x);
    ASSERT_LE(std::abs(g1 - g0), 1e-10 * std::max(1.0, std::abs(g1))) << "x=" << x;
  }
}

TEST(Specfun, DerivativeConsistency) {
  const double h = 1e-5;
  for (double x = 0.1; x <= 100.0; x *= 1.37) {
    const double fd_psi = (ln_gamma(x + h) - ln_gamma(x - h)) / (2.0 * h);
    EXPECT_NEAR(fd_psi, digamma(x), 1e-6 * std::max(1.0, std::abs(digamma(x)))) << "x=" << x;
    const double fd_tri = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
    EXPECT_NEAR(fd_tri, trigamma(x), 1e-6 * std::max(1.0, trigamma(x))) << "x=" << x;
  }
}

TEST(Specfun, RejectsOutsideDomain) {
  for (double x : {0.0, -1.0, -0.5, std::numeric_limits<double>::infinity(),
                   std::numeric_limits<double>::quiet_NaN()}) {
    EXPECT_THROW(ln_gamma(x), std::domain_error);
    EXPECT_THROW(digamma(x), std::domain_error);
    EXPECT_THROW(trigamma(x), std::domain_error);
  }
}
