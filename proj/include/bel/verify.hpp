#pragma once

// Property suites checked against independent oracles (grid quadrature,
// central finite differences, plain gradient descent, hand-evaluated ECE).
// Used by `bel selftest` and by the acceptance test binary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "bel/edl_loss.hpp"
#include "bel/eval.hpp"
#include "bel/evidence.hpp"
#include "bel/fusion.hpp"
#include "bel/model.hpp"
#include "bel/rng.hpp"
#include "bel/specfun.hpp"
#include "bel/train.hpp"

namespace bel::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

inline std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

inline CheckResult timed(const std::string& name, const std::function<CheckResult()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r = body();
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// |a - b| <= rel * max(|a|, |b|) + abs_floor
inline bool close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

/// Bayes' rule on a barycentric grid: Dir(z|beta) * prod z^gamma, normalised
/// over the interior grid points, against Dir(z|beta+gamma) normalised the
/// same way.
template <class Special = specfun::Standard>
CheckResult fusion_theorem(int cases = 100, int grid = 200, double tol = 1e-6, std::uint64_t seed = 11) {
  CheckResult res;
  Rng rng(seed);
  double worst = 0.0;
  std::vector<std::array<double, 3>> pts;
  for (int i = 1; i < grid; ++i) {
    for (int j = 1; i + j < grid; ++j) {
      pts.push_back({static_cast<double>(i) / grid, static_cast<double>(j) / grid,
                     static_cast<double>(grid - i - j) / grid});
    }
  }
  std::vector<double> lhs(pts.size()), rhs(pts.size());
  for (int c = 0; c < cases; ++c) {
    std::vector<double> beta(3), gamma(3);
    for (auto& b : beta) b = rng.uniform(1.0, 10.0);
    for (auto& g : gamma) g = rng.uniform(0.0, 10.0);
    const DirichletParams prior(beta);
    const DirichletParams post = posterior_params(prior, gamma);
    double lmax = -INFINITY, rmax = -INFINITY;
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const auto& z = pts[p];
      double log_like = 0.0;
      for (int k = 0; k < 3; ++k) log_like += gamma[k] * std::log(z[k]);
      lhs[p] = dirichlet_log_density<Special>(prior, z) + log_like;
      rhs[p] = dirichlet_log_density<Special>(post, z);
      lmax = std::max(lmax, lhs[p]);
      rmax = std::max(rmax, rhs[p]);
    }
    double lsum = 0.0, rsum = 0.0;
    for (std::size_t p = 0; p < pts.size(); ++p) {
      lhs[p] = std::exp(lhs[p] - lmax);
      rhs[p] = std::exp(rhs[p] - rmax);
      lsum += lhs[p];
      rsum += rhs[p];
    }
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const double a = lhs[p] / lsum, b = rhs[p] / rsum;
      if (b > 0.0) worst = std::max(worst, std::abs(a - b) / b);
    }
  }
  res.passed = worst <= tol;
  res.detail = fmt("%d cases, %zu grid points, max relative error %.3g (tol %.1g)", cases, pts.size(), worst, tol);
  return res;
}

/// Exact alpha-gradient against central differences of the loss.
template <class Special = specfun::Standard>
CheckResult gradient_exactness(int cases = 1000, double tol = 1e-5, double abs_floor = 1e-8,
                               std::uint64_t seed = 12) {
  CheckResult res;
  res.passed = true;
  Rng rng(seed);
  const int ks[] = {2, 3, 5, 10};
  const double lambdas[] = {0.0, 0.04, 0.1, 1.0};
  double worst = 0.0;
  // Fourth-order central stencil; the second-order one at small h is limited
  // by round-off in ln_gamma(S) for large S.
  const double h = 1e-3;
  for (int c = 0; c < cases; ++c) {
    const int k = ks[c % 4];
    const double lambda = lambdas[(c / 4) % 4];
    std::vector<double> alpha(k);
    for (auto& a : alpha) a = rng.uniform(1.1, 50.0);
    const OneHotLabel y(k, rng.uniform_below(k));
    const auto g = bel_gradient<Special>(DirichletParams(alpha), y, lambda);
    auto loss_at = [&](int j, double d) {
      auto moved = alpha;
      moved[j] += d;
      return bel_loss_from_params<Special>(DirichletParams(moved), y, lambda).total;
    };
    for (int j = 0; j < k; ++j) {
      const double fd =
          (8.0 * (loss_at(j, h) - loss_at(j, -h)) - (loss_at(j, 2.0 * h) - loss_at(j, -2.0 * h))) / (12.0 * h);
      const double err = std::abs(fd - g[j]) / std::max({std::abs(fd), std::abs(g[j]), abs_floor / tol});
      worst = std::max(worst, err);
      if (!close(fd, g[j], tol, abs_floor) && res.passed) {
        res.passed = false;
        res.detail = fmt("first failure: K=%d lambda=%g component %d analytic %.10g finite-diff %.10g; ", k,
                         lambda, j, g[j], fd);
      }
    }
  }
  res.detail += fmt("%d cases, max scaled error %.3g (tol %.1g rel + %.1g abs)", cases, worst, tol, abs_floor);
  return res;
}

/// Projected gradient descent in alpha (alpha >= 1) from (2, ..., 2) reaches
/// 1 + y / lambda.
template <class Special = specfun::Standard>
CheckResult stationary_point(double tol = 1e-3) {
  CheckResult res;
  res.passed = true;
  for (double lambda : {0.04, 0.1, 1.0}) {
    for (int k : {3, 5}) {
      const OneHotLabel y(k, 0);
      std::vector<double> alpha(k, 2.0);
      int it = 0;
      for (; it < 1'000'000; ++it) {
        const auto g = bel_gradient<Special>(DirichletParams(alpha), y, lambda);
        double step = 0.0;
        for (int j = 0; j < k; ++j) {
          const double next = std::max(1.0, alpha[j] - g[j]);
          step = std::max(step, std::abs(next - alpha[j]));
          alpha[j] = next;
        }
        if (step < 1e-12) break;
      }
      double err = 0.0;
      for (int j = 0; j < k; ++j) err = std::max(err, std::abs(alpha[j] - (1.0 + y[j] / lambda)));
      res.detail += fmt("lambda=%g K=%d: %d iters, max |alpha - alpha*| = %.2g; ", lambda, k, it, err);
      if (err > tol) res.passed = false;
    }
  }
  return res;
}

/// Three hand-computed ECE cases plus a perfectly calibrated synthetic stream.
inline CheckResult ece_cases(std::uint64_t seed = 13) {
  CheckResult res;
  std::vector<PredictionRecord> perfect(10);
  for (auto& r : perfect) r.confidence = 1.0;
  const double e1 = ece(perfect, 15);
  const std::vector<PredictionRecord> two{{0, 1, 1, 0.8, 0.5}, {0, 1, 0, 0.6, 0.5}};
  const double e2 = ece(two, 10);
  const int edge_bin = ece_bin(0.6, 10);

  Rng rng(seed);
  std::vector<PredictionRecord> calibrated(100000);
  for (auto& r : calibrated) {
    r.confidence = rng.uniform(0.2, 1.0);
    r.truth = 0;
    r.predicted = rng.uniform01() < r.confidence ? 0 : 1;
  }
  const double e4 = ece(calibrated, 15);
  res.passed = e1 == 0.0 && std::abs(e2 - 0.4) < 1e-15 && edge_bin == 5 && e4 < 0.01;
  res.detail = fmt("all-correct %.3g (want 0), two-query %.17g (want 0.4), bin of 0.6 = %d (want 5), "
                   "calibrated 1e5 stream %.4f (want < 0.01)",
                   e1, e2, edge_bin, e4);
  return res;
}

/// Every parameter gradient of the full BEL episode loss (2-layer net, prior
/// fusion, learnable temperature) against central finite differences.
inline CheckResult model_gradient(double tol = 1e-4, double abs_floor = 1e-8, std::uint64_t seed = 14) {
  CheckResult res;
  res.passed = true;
  Rng rng(seed);
  MetricModel meta{EmbeddingNet::random({6, 8, 5}, rng), MetricHead{Metric::cosine, 3.0}};
  const MetricModel prior{EmbeddingNet::random({6, 8, 5}, rng), MetricHead{Metric::cosine, 2.0}};
  EpisodeBatch batch;
  batch.way = 3;
  batch.support = Matrix(3, 6);
  batch.query = Matrix(6, 6);
  for (Eigen::Index i = 0; i < batch.support.size(); ++i) batch.support(i) = rng.normal();
  for (Eigen::Index i = 0; i < batch.query.size(); ++i) batch.query(i) = rng.normal();
  batch.support_labels = {0, 1, 2};
  batch.query_labels = {0, 0, 1, 1, 2, 2};
  const LossSettings s{LossKind::bel, FusionConfig{0.4, FusionRule::evidence}, 0.1, 0.0};

  const auto obj = episode_objective(meta, &prior, batch, s);
  const double h = 1e-6;
  double worst = 0.0;
  int checked = 0;
  auto compare = [&](double analytic, double fd, const std::string& what) {
    ++checked;
    const double err = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), abs_floor / tol});
    worst = std::max(worst, err);
    if (!close(fd, analytic, tol, abs_floor) && res.passed) {
      res.passed = false;
      res.detail = fmt("first failure: %s analytic %.10g finite-diff %.10g; ", what.c_str(), analytic, fd);
    }
  };
  auto params = meta.net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = episode_objective(meta, &prior, batch, s).loss;
    params[i] = keep - h;
    const double down = episode_objective(meta, &prior, batch, s).loss;
    params[i] = keep;
    compare(obj.gradients.net[i], (up - down) / (2.0 * h), "net parameter " + std::to_string(i));
  }
  const double keep = meta.head.temperature;
  meta.head.temperature = keep + h;
  const double up = episode_objective(meta, &prior, batch, s).loss;
  meta.head.temperature = keep - h;
  const double down = episode_objective(meta, &prior, batch, s).loss;
  meta.head.temperature = keep;
  compare(obj.gradients.temperature, (up - down) / (2.0 * h), "temperature");
  res.detail += fmt("%d parameters, max scaled error %.3g (tol %.1g rel + %.1g abs)", checked, worst, tol, abs_floor);
  return res;
}

template <class Special = specfun::Standard>
std::vector<CheckResult> selftest_suite() {
  std::vector<CheckResult> out;
  out.push_back(timed("fusion theorem oracle", [] { return fusion_theorem<Special>(); }));
  out.push_back(timed("gradient vs finite differences", [] { return gradient_exactness<Special>(); }));
  out.push_back(timed("stationary point 1 + y/lambda", [] { return stationary_point<Special>(); }));
  out.push_back(timed("ECE hand cases", [] { return ece_cases(); }));
  out.push_back(timed("end-to-end model gradient", [] { return model_gradient(); }));
  return out;
}

/// Special functions with digamma perturbed by 1e-3 x; the gradient suite
/// must notice.
struct FaultyDigamma {
  static double ln_gamma(double x) { return specfun::ln_gamma(x); }
  static double digamma(double x) { return specfun::digamma(x) + 1e-3 * x; }
  static double trigamma(double x) { return specfun::trigamma(x); }
};

}  // namespace bel::verify
