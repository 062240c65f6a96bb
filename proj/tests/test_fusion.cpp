#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "bel/fusion.hpp"
#include "bel/rng.hpp"
#include "bel/verify.hpp"
#include "simplex_quadrature.hpp"

using namespace bel;

namespace {

void expect_evidence(const Evidence& e, std::vector<double> want) {
  ASSERT_EQ(e.classes(), want.size());
  for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(e[k], want[k], 1e-15) << "k=" << k;
}

}  // namespace

TEST(FuseEvidence, Examples) {
  expect_evidence(fuse_evidence(Evidence({5, 5, 5}), Evidence({1, 2, 3}), {0.0}), {1, 2, 3});
  expect_evidence(fuse_evidence(Evidence({1, 0, 0}), Evidence({2, 1, 1}), {1.0}), {3, 1, 1});
  expect_evidence(fuse_evidence(Evidence({10, 0, 0}), Evidence({0, 0, 0}), {0.4}), {4, 0, 0});
}

TEST(FuseEvidence, Errors) {
  EXPECT_THROW(fuse_evidence(Evidence({1, 1}), Evidence({1, 1, 1}), {0.4}), std::invalid_argument);
  EXPECT_THROW(fuse_evidence(Evidence({1, 1}), Evidence({1, 1}), {-0.1}), std::invalid_argument);
  EXPECT_THROW(fuse_evidence(Evidence({1, 1}), Evidence({1, 1}), {NAN}), std::invalid_argument);
}

TEST(FuseEvidence, ConcentrationRuleAddsEtaToAlpha) {
  const FusionConfig cfg{0.4, FusionRule::concentration};
  const Evidence prior({3, 0, 1}), meta({1, 2, 0});
  const auto p = fused_params(prior, meta, cfg);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(p[k], 0.4 * (prior[k] + 1.0) + (meta[k] + 1.0), 1e-15);
  }
  EXPECT_EQ(fusion_rule_from_string("alpha"), FusionRule::concentration);
  EXPECT_EQ(fusion_rule_from_string("evidence"), FusionRule::evidence);
  EXPECT_THROW(fusion_rule_from_string("both"), std::invalid_argument);
}

TEST(PosteriorParams, Examples) {
  auto p = posterior_params(DirichletParams({2, 1, 1}), std::vector<double>{1, 0, 0});
  EXPECT_EQ(p, DirichletParams({3, 1, 1}));
  p = posterior_params(DirichletParams({1, 1, 1}), std::vector<double>{0, 0, 0});
  EXPECT_EQ(p, DirichletParams({1, 1, 1}));
  EXPECT_THROW(posterior_params(DirichletParams({1, 1, 1}), std::vector<double>{0, -1, 0}), std::invalid_argument);
  EXPECT_THROW(posterior_params(DirichletParams({1, 1, 1}), std::vector<double>{0, 1}), std::invalid_argument);
}

TEST(PosteriorParams, BayesRuleOnGrid) {
  const DirichletParams beta({2, 3, 4});
  const std::vector<double> gamma{1.5, 0.5, 2.0};
  const auto post = posterior_params(beta, gamma);
  const auto pts = quadrature::simplex_centroids(200);
  std::vector<double> lhs, rhs;
  double lsum = 0.0, rsum = 0.0;
  for (const auto& z : pts) {
    double l = std::exp(dirichlet_log_density(beta, z));
    for (int k = 0; k < 3; ++k) l *= std::pow(z[k], gamma[k]);
    const double r = std::exp(dirichlet_log_density(post, z));
    lhs.push_back(l);
    rhs.push_back(r);
    lsum += l;
    rsum += r;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    worst = std::max(worst, std::abs(lhs[i] / lsum - rhs[i] / rsum) / (rhs[i] / rsum));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(PosteriorParams, TheoremOracleRandomCases) {
  const auto r = verify::fusion_theorem(20, 120);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(FusionProperty, FusedParamsFormula) {
  Rng rng(21);
  for (int i = 0; i < 500; ++i) {
    const int k = 2 + rng.uniform_below(8);
    std::vector<double> ep(k), em(k);
    for (auto& v : ep) v = rng.uniform(0.0, 30.0);
    for (auto& v : em) v = rng.uniform(0.0, 30.0);
    const double eta = rng.uniform(0.0, 2.0);
    const auto p = fused_params(Evidence(ep), Evidence(em), {eta});
    for (int j = 0; j < k; ++j) EXPECT_NEAR(p[j], eta * ep[j] + em[j] + 1.0, 1e-12);
  }
}

TEST(FusionProperty, SequentialUpdatesAccumulate) {
  Rng rng(22);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> beta(4), g1(4), g2(4), g12(4);
    for (int k = 0; k < 4; ++k) {
      beta[k] = rng.uniform(1.0, 10.0);
      g1[k] = rng.uniform(0.0, 10.0);
      g2[k] = rng.uniform(0.0, 10.0);
      g12[k] = g1[k] + g2[k];
    }
    const auto two_step = posterior_params(posterior_params(DirichletParams(beta), g1), g2);
    const auto one_step = posterior_params(DirichletParams(beta), g12);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(two_step[k], one_step[k], 1e-12);
  }
}

TEST(FusionProperty, PriorNeverRaisesUncertainty) {
  Rng rng(23);
  for (int i = 0; i < 500; ++i) {
    const int k = 2 + rng.uniform_below(8);
    std::vector<double> ep(k, 0.0), em(k);
    ep[rng.uniform_below(k)] = rng.uniform(1e-3, 10.0);
    for (auto& v : em) v = rng.uniform(0.0, 30.0);
    const double eta = rng.uniform(1e-3, 2.0);
    const double fused_u = params_to_opinion(fused_params(Evidence(ep), Evidence(em), {eta})).uncertainty;
    const double meta_u = params_to_opinion(evidence_to_params(Evidence(em))).uncertainty;
    EXPECT_LT(fused_u, meta_u);
  }
}
