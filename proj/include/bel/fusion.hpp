#pragma once

// Bayesian fusion of prior (frozen pre-trained) and observed (meta-trained)
// evidence. A Dirichlet prior Dir(beta) updated with pseudo-counts gamma
// gives the posterior Dir(beta + gamma); at the evidence level this is
// e = eta * e_prior + e_meta.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bel/evidence.hpp"

namespace bel {

enum class FusionRule {
  /// e = eta * e_prior + e_meta, alpha = e + 1.
  evidence,
  /// alpha = eta * alpha_prior + alpha_meta, i.e. e = eta * e_prior + e_meta + eta.
  concentration,
};

inline const char* to_string(FusionRule r) {
  return r == FusionRule::evidence ? "evidence" : "concentration";
}

inline FusionRule fusion_rule_from_string(const std::string& s) {
  if (s == "evidence") return FusionRule::evidence;
  if (s == "concentration" || s == "alpha") return FusionRule::concentration;
  throw std::invalid_argument("unknown fusion rule '" + s + "'");
}

struct FusionConfig {
  double eta = 0.4;
  FusionRule rule = FusionRule::evidence;

  void validate() const {
    if (!std::isfinite(eta) || eta < 0.0) {
      throw std::invalid_argument("FusionConfig: eta must be finite and >= 0, got " +
                                  std::to_string(eta));
    }
  }
};

inline Evidence fuse_evidence(const Evidence& prior, const Evidence& observed,
                              const FusionConfig& cfg) {
  cfg.validate();
  if (prior.classes() != observed.classes()) {
    throw std::invalid_argument("fuse_evidence: prior has " + std::to_string(prior.classes()) +
                                " classes, observed has " + std::to_string(observed.classes()));
  }
  const double offset = cfg.rule == FusionRule::concentration ? cfg.eta : 0.0;
  std::vector<double> fused(prior.classes());
  for (std::size_t k = 0; k < fused.size(); ++k) {
    fused[k] = cfg.eta * prior[k] + observed[k] + offset;
  }
  return Evidence(std::move(fused));
}

inline DirichletParams fused_params(const Evidence& prior, const Evidence& observed,
                                    const FusionConfig& cfg) {
  return evidence_to_params(fuse_evidence(prior, observed, cfg));
}

/// Conjugate update: Dir(beta) prior times prod z_k^gamma_k gives Dir(beta + gamma).
/// Counts may be any non-negative reals.
inline DirichletParams posterior_params(const DirichletParams& prior,
                                        std::span<const double> counts) {
  if (counts.size() != prior.classes()) {
    throw std::invalid_argument("posterior_params: dimension mismatch");
  }
  std::vector<double> alpha(prior.classes());
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (!std::isfinite(counts[k]) || counts[k] < 0.0) {
      throw std::invalid_argument("posterior_params: count " + std::to_string(k) +
                                  " must be finite and >= 0");
    }
    alpha[k] = prior[k] + counts[k];
  }
  return DirichletParams(std::move(alpha));
}

}  // namespace bel
