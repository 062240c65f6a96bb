#pragma once

// Subjective-logic view of a Dirichlet: evidence e_k >= 0, concentration
// alpha_k = e_k + 1, belief b_k = e_k / S and uncertainty u = K / S where
// S = sum_k alpha_k.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bel/specfun.hpp"

namespace bel {

/// Non-negative per-class evidence, K >= 2.
class Evidence {
 public:
  explicit Evidence(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 2) {
      throw std::invalid_argument("Evidence: need at least 2 classes, got " +
                                  std::to_string(values_.size()));
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k]) || values_[k] < 0.0) {
        throw std::invalid_argument("Evidence: entry " + std::to_string(k) +
                                    " must be finite and >= 0, got " + std::to_string(values_[k]));
      }
    }
  }

  std::size_t classes() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  std::span<const double> values() const { return values_; }
  double total() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

  friend bool operator==(const Evidence&, const Evidence&) = default;

 private:
  std::vector<double> values_;
};

/// Dirichlet concentration vector with every alpha_k >= 1 and its cached
/// strength S = sum_k alpha_k.
class DirichletParams {
 public:
  explicit DirichletParams(std::vector<double> alpha) : alpha_(std::move(alpha)) {
    if (alpha_.size() < 2) {
      throw std::invalid_argument("DirichletParams: need at least 2 classes");
    }
    for (std::size_t k = 0; k < alpha_.size(); ++k) {
      if (!std::isfinite(alpha_[k]) || alpha_[k] < 1.0) {
        throw std::invalid_argument("DirichletParams: alpha[" + std::to_string(k) +
                                    "] must be finite and >= 1, got " + std::to_string(alpha_[k]));
      }
    }
    strength_ = std::accumulate(alpha_.begin(), alpha_.end(), 0.0);
  }

  std::size_t classes() const { return alpha_.size(); }
  double operator[](std::size_t k) const { return alpha_[k]; }
  std::span<const double> alpha() const { return alpha_; }
  double strength() const { return strength_; }

  friend bool operator==(const DirichletParams& a, const DirichletParams& b) {
    return a.alpha_ == b.alpha_;
  }

 private:
  std::vector<double> alpha_;
  double strength_ = 0.0;
};

/// Belief masses plus uncertainty; u + sum(b) = 1. Only produced from a
/// DirichletParams, so the invariant holds by construction.
struct Opinion {
  std::vector<double> belief;
  double uncertainty = 1.0;
};

inline DirichletParams evidence_to_params(const Evidence& e) {
  std::vector<double> alpha(e.classes());
  for (std::size_t k = 0; k < alpha.size(); ++k) alpha[k] = e[k] + 1.0;
  return DirichletParams(std::move(alpha));
}

inline Opinion params_to_opinion(const DirichletParams& p) {
  const double s = p.strength();
  Opinion o;
  o.belief.resize(p.classes());
  for (std::size_t k = 0; k < p.classes(); ++k) o.belief[k] = (p[k] - 1.0) / s;
  o.uncertainty = static_cast<double>(p.classes()) / s;
  return o;
}

/// Mean of the Dirichlet, alpha_k / S.
inline std::vector<double> expected_probability(const DirichletParams& p) {
  std::vector<double> out(p.classes());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = p[k] / p.strength();
  return out;
}

/// ln of the Dirichlet density at an interior simplex point x.
template <class Special = specfun::Standard>
double dirichlet_log_density(const DirichletParams& p, std::span<const double> x) {
  if (x.size() != p.classes()) {
    throw std::invalid_argument("dirichlet_log_density: dimension mismatch");
  }
  double sum = 0.0;
  for (double xk : x) {
    if (!(xk > 0.0) || !std::isfinite(xk)) {
      throw std::domain_error("dirichlet_log_density: point must be strictly inside the simplex");
    }
    sum += xk;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::domain_error("dirichlet_log_density: point does not sum to 1");
  }
  double out = Special::ln_gamma(p.strength());
  for (std::size_t k = 0; k < x.size(); ++k) {
    out += (p[k] - 1.0) * std::log(x[k]) - Special::ln_gamma(p[k]);
  }
  return out;
}

}  // namespace bel
