#pragma once

// Evidential loss: Bayes risk of cross entropy under Dir(alpha) plus
// lambda * KL(Dir(alpha) || Dir(1)), with its exact gradient in alpha.
// Softmax cross entropy and label smoothing are provided as baselines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bel/evidence.hpp"
#include "bel/fusion.hpp"
#include "bel/specfun.hpp"

namespace bel {

/// One-hot target over K classes.
class OneHotLabel {
 public:
  OneHotLabel(std::size_t classes, std::size_t index) : classes_(classes), index_(index) {
    if (classes < 2) throw std::invalid_argument("OneHotLabel: need at least 2 classes");
    if (index >= classes) {
      throw std::invalid_argument("OneHotLabel: index " + std::to_string(index) +
                                  " out of range for " + std::to_string(classes) + " classes");
    }
  }

  std::size_t classes() const { return classes_; }
  std::size_t index() const { return index_; }
  double operator[](std::size_t k) const { return k == index_ ? 1.0 : 0.0; }

  std::vector<double> dense() const {
    std::vector<double> y(classes_, 0.0);
    y[index_] = 1.0;
    return y;
  }

 private:
  std::size_t classes_;
  std::size_t index_;
};

struct LossConfig {
  double lambda = 0.04;
  /// Linear ramp of lambda from 0 over this many epochs; 0 disables the ramp.
  int anneal_epochs = 0;

  void validate() const {
    if (!std::isfinite(lambda) || lambda < 0.0) {
      throw std::invalid_argument("LossConfig: lambda must be finite and >= 0");
    }
    if (anneal_epochs < 0) throw std::invalid_argument("LossConfig: anneal_epochs must be >= 0");
  }

  /// Effective lambda at a zero-based epoch.
  double lambda_at(int epoch) const {
    if (anneal_epochs == 0) return lambda;
    return lambda * std::min(1.0, static_cast<double>(epoch) / anneal_epochs);
  }
};

struct LossValue {
  double total = 0.0;
  double bayes_risk = 0.0;
  double kl = 0.0;
};

namespace detail {
inline void check_label(const DirichletParams& p, const OneHotLabel& y) {
  if (p.classes() != y.classes()) {
    throw std::invalid_argument("label has " + std::to_string(y.classes()) +
                                " classes, Dirichlet has " + std::to_string(p.classes()));
  }
}
}  // namespace detail

/// E_{p ~ Dir(alpha)}[-log p_y] = psi(S) - psi(alpha_y).
template <class Special = specfun::Standard>
double bayes_risk(const DirichletParams& p, const OneHotLabel& y) {
  detail::check_label(p, y);
  return Special::digamma(p.strength()) - Special::digamma(p[y.index()]);
}

/// KL(Dir(alpha) || Dir(1, ..., 1)).
template <class Special = specfun::Standard>
double kl_to_uniform(const DirichletParams& p) {
  const double k = static_cast<double>(p.classes());
  const double s = p.strength();
  const double psi_s = Special::digamma(s);
  double out = Special::ln_gamma(s) - Special::ln_gamma(k);
  for (double a : p.alpha()) {
    out -= Special::ln_gamma(a);
    out += (a - 1.0) * (Special::digamma(a) - psi_s);
  }
  return out;
}

template <class Special = specfun::Standard>
LossValue bel_loss_from_params(const DirichletParams& p, const OneHotLabel& y, double lambda) {
  LossValue v;
  v.bayes_risk = bayes_risk<Special>(p, y);
  v.kl = kl_to_uniform<Special>(p);
  v.total = v.bayes_risk + lambda * v.kl;
  return v;
}

/// Per-sample loss after fusing prior and meta evidence.
template <class Special = specfun::Standard>
LossValue bel_loss(const Evidence& prior_e, const Evidence& meta_e, const OneHotLabel& y,
                   const FusionConfig& fusion, const LossConfig& cfg) {
  cfg.validate();
  const DirichletParams p = fused_params(prior_e, meta_e, fusion);
  return bel_loss_from_params<Special>(p, y, cfg.lambda);
}

/// Exact gradient of bayes_risk + lambda * kl_to_uniform with respect to alpha:
///   psi'(alpha_k) [-y_k + lambda (alpha_k - 1)] + psi'(S) [1 - lambda (S - K)].
/// Zero at alpha = 1 + y / lambda.
template <class Special = specfun::Standard>
std::vector<double> bel_gradient(const DirichletParams& p, const OneHotLabel& y, double lambda) {
  detail::check_label(p, y);
  const double k = static_cast<double>(p.classes());
  const double s = p.strength();
  const double shared = Special::trigamma(s) * (1.0 - lambda * (s - k));
  std::vector<double> g(p.classes());
  for (std::size_t j = 0; j < g.size(); ++j) {
    g[j] = Special::trigamma(p[j]) * (-y[j] + lambda * (p[j] - 1.0)) + shared;
  }
  return g;
}

template <class Special = specfun::Standard>
std::vector<double> bel_gradient(const DirichletParams& p, const OneHotLabel& y,
                                 const LossConfig& cfg) {
  cfg.validate();
  return bel_gradient<Special>(p, y, cfg.lambda);
}

/// Gradient with psi'(S) replaced by 1/S. Only meant for logging: the term
/// (lambda K + 1) / S scales with the uncertainty u = K / S.
struct ApproxGradient {
  std::vector<double> gradient;
  /// (lambda K + 1) / S.
  double uncertainty_term = 0.0;
  /// -lambda + uncertainty_term, added to every component.
  double shared_term = 0.0;
};

template <class Special = specfun::Standard>
ApproxGradient bel_gradient_approx(const DirichletParams& p, const OneHotLabel& y,
                                   const LossConfig& cfg) {
  cfg.validate();
  detail::check_label(p, y);
  const double lambda = cfg.lambda;
  const double k = static_cast<double>(p.classes());
  ApproxGradient out;
  out.uncertainty_term = (lambda * k + 1.0) / p.strength();
  out.shared_term = -lambda + out.uncertainty_term;
  out.gradient.resize(p.classes());
  for (std::size_t j = 0; j < out.gradient.size(); ++j) {
    out.gradient[j] =
        Special::trigamma(p[j]) * (-y[j] + lambda * (p[j] - 1.0)) + out.shared_term;
  }
  return out;
}

// -- softmax baselines ------------------------------------------------------

inline double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> z) {
  const double lse = log_sum_exp(z);
  std::vector<double> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = std::exp(z[k] - lse);
  return out;
}

inline void check_logits(std::span<const double> z, const OneHotLabel& y) {
  if (z.size() != y.classes()) throw std::invalid_argument("logit/label dimension mismatch");
  for (double v : z) {
    if (!std::isfinite(v)) throw std::invalid_argument("logits must be finite");
  }
}

inline double cross_entropy(std::span<const double> z, const OneHotLabel& y) {
  check_logits(z, y);
  return log_sum_exp(z) - z[y.index()];
}

/// softmax(z) - y.
inline std::vector<double> softmax_ce_gradient(std::span<const double> z, const OneHotLabel& y) {
  check_logits(z, y);
  std::vector<double> g = softmax(z);
  g[y.index()] -= 1.0;
  return g;
}

inline void check_epsilon(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("label smoothing epsilon must be in [0, 1), got " +
                                std::to_string(epsilon));
  }
}

/// (1 - eps) CE(y, softmax z) + eps CE(uniform, softmax z).
inline double label_smooth_loss(std::span<const double> z, const OneHotLabel& y, double epsilon) {
  check_epsilon(epsilon);
  check_logits(z, y);
  const double lse = log_sum_exp(z);
  double uniform_ce = 0.0;
  for (double v : z) uniform_ce += lse - v;
  uniform_ce /= static_cast<double>(z.size());
  return (1.0 - epsilon) * (lse - z[y.index()]) + epsilon * uniform_ce;
}

/// Derivative of label_smooth_loss: softmax(z) - [(1 - eps) y + eps / K].
inline std::vector<double> label_smooth_gradient(std::span<const double> z, const OneHotLabel& y,
                                                 double epsilon) {
  check_epsilon(epsilon);
  check_logits(z, y);
  std::vector<double> g = softmax(z);
  const double uniform = epsilon / static_cast<double>(z.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] -= (1.0 - epsilon) * y[k] + uniform;
  return g;
}

}  // namespace bel
