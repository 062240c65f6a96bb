#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "bel/model.hpp"
#include "bel/rng.hpp"
#include "bel/verify.hpp"

using namespace bel;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

EpisodeBatch random_batch(Rng& rng, int way, int shot, int query, int dim) {
  EpisodeBatch b;
  b.way = way;
  b.support = random_matrix(rng, way * shot, dim);
  b.query = random_matrix(rng, way * query, dim);
  for (int k = 0; k < way; ++k) {
    for (int s = 0; s < shot; ++s) b.support_labels.push_back(k);
    for (int q = 0; q < query; ++q) b.query_labels.push_back(k);
  }
  return b;
}

}  // namespace

TEST(Embed, ZeroNetGivesZero) {
  const EmbeddingNet net({4, 6, 3});
  const Vector x = Vector::LinSpaced(4, -1.0, 2.0);
  EXPECT_EQ(embed(net, x), Vector::Zero(3));
}

TEST(Embed, IdentityLayerIsRectifier) {
  EmbeddingNet net({3, 3}, true);
  net.weight(0) = Matrix::Identity(3, 3);
  Vector x(3);
  x << -1.5, 0.0, 2.5;
  Vector want(3);
  want << 0.0, 0.0, 2.5;
  EXPECT_EQ(embed(net, x), want);
  EmbeddingNet linear({3, 3});
  linear.weight(0) = Matrix::Identity(3, 3);
  EXPECT_EQ(embed(linear, x), x);
}

TEST(Embed, DimensionMismatch) {
  const EmbeddingNet net({4, 3});
  EXPECT_THROW(embed(net, Vector::Zero(5)), std::invalid_argument);
  EXPECT_THROW(EmbeddingNet({4}), std::invalid_argument);
  EXPECT_THROW(EmbeddingNet({4, 0}), std::invalid_argument);
}

TEST(Embed, JacobianMatchesFiniteDifferences) {
  Rng rng(41);
  const auto net = EmbeddingNet::random({7, 9, 8, 4}, rng);
  const double h = 1e-6;
  for (int t = 0; t < 5; ++t) {
    const Matrix x = random_matrix(rng, 1, 7);
    EmbeddingNet::Cache cache;
    net.forward(x, &cache);
    std::vector<double> scratch(net.num_parameters());
    for (int o = 0; o < 4; ++o) {
      Matrix seed = Matrix::Zero(1, 4);
      seed(0, o) = 1.0;
      const Matrix row = net.backward(cache, seed, scratch);
      for (int i = 0; i < 7; ++i) {
        Matrix up = x, down = x;
        up(0, i) += h;
        down(0, i) -= h;
        const double fd = (net.forward(up)(0, o) - net.forward(down)(0, o)) / (2.0 * h);
        EXPECT_NEAR(row(0, i), fd, 1e-4 * std::max(1.0, std::abs(fd))) << "out " << o << " in " << i;
      }
    }
  }
}

TEST(Embed, ForwardIsDeterministic) {
  Rng rng(42);
  const auto net = EmbeddingNet::random({5, 6, 3}, rng);
  const Matrix x = random_matrix(rng, 10, 5);
  EXPECT_EQ(net.forward(x), net.forward(x));
}

TEST(Prototypes, Examples) {
  Matrix one(1, 2);
  one << 3.0, -1.0;
  EXPECT_EQ(prototypes(one, std::vector<int>{0}, 1), one);

  Matrix twin(2, 2);
  twin << 0.5, 2.0, 0.5, 2.0;
  EXPECT_EQ(prototypes(twin, std::vector<int>{0, 0}, 1), twin.topRows(1));

  Matrix shots(2, 2);
  shots << 1.0, 0.0, 0.0, 1.0;
  Matrix want(1, 2);
  want << 0.5, 0.5;
  EXPECT_EQ(prototypes(shots, std::vector<int>{0, 0}, 1), want);
  EXPECT_THROW(prototypes(shots, std::vector<int>{0, 0}, 2), std::invalid_argument);
}

TEST(EvidenceLogits, Examples) {
  Matrix protos(3, 3);
  protos << 1, 0, 0, 0, 2, 0, 0, 0, 3;
  const MetricHead cos{Metric::cosine, 10.0};
  auto out = evidence_logits(cos, Vector(protos.row(0).transpose()), protos);
  EXPECT_DOUBLE_EQ(out.logits[0], 10.0);
  for (double z : out.logits) EXPECT_LE(z, out.logits[0]);

  Matrix flat(2, 3);
  flat << 1, 0, 0, 0, 1, 0;
  out = evidence_logits(cos, Vector::Unit(3, 2), flat);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(out.logits[k], 0.0);
    EXPECT_EQ(out.evidence[k], 1.0);
  }

  const MetricHead euc{Metric::neg_sq_euclidean, 1.0};
  out = evidence_logits(euc, Vector(protos.row(0).transpose()), protos);
  EXPECT_EQ(out.logits[0], 0.0);
  EXPECT_EQ(out.evidence[0], 1.0);
  EXPECT_LT(out.evidence[1], 1.0);
  EXPECT_LT(out.evidence[2], 1.0);

  EXPECT_THROW(evidence_logits(cos, Vector::Zero(3), protos), std::domain_error);
  EXPECT_THROW(evidence_logits(cos, Vector::Ones(2), protos), std::invalid_argument);
  EXPECT_THROW(evidence_logits(MetricHead{Metric::cosine, 0.0}, Vector::Ones(3), protos), std::invalid_argument);
}

TEST(EvidenceLogits, ClampAndPositivity) {
  EXPECT_EQ(logit_evidence(40.0), std::exp(kLogitClamp));
  EXPECT_EQ(logit_evidence(-40.0), std::exp(-kLogitClamp));
  Rng rng(43);
  for (int i = 0; i < 1000; ++i) {
    const double e = logit_evidence(rng.uniform(-100.0, 100.0));
    EXPECT_GT(e, 0.0);
    EXPECT_TRUE(std::isfinite(e));
  }
}

TEST(EvidenceLogits, PermutationEquivariant) {
  Rng rng(44);
  const Matrix protos = random_matrix(rng, 5, 6);
  const Vector q = random_matrix(rng, 6, 1);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  Matrix permuted(5, 6);
  for (int k = 0; k < 5; ++k) permuted.row(k) = protos.row(perm[k]);
  for (auto metric : {Metric::cosine, Metric::neg_sq_euclidean}) {
    const MetricHead head{metric, 7.0};
    const auto a = evidence_logits(head, q, protos);
    const auto b = evidence_logits(head, q, permuted);
    for (int k = 0; k < 5; ++k) EXPECT_EQ(b.logits[k], a.logits[perm[k]]);
  }
}

TEST(Backward, ZeroUpstreamGivesZero) {
  Rng rng(45);
  const MetricModel model{EmbeddingNet::random({6, 8, 5}, rng), MetricHead{}};
  const auto batch = random_batch(rng, 3, 1, 2, 6);
  const auto f = forward_episode(model, batch);
  const auto g = backward(model, f, Matrix::Zero(f.logits.rows(), f.logits.cols()));
  for (double v : g.net) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g.temperature, 0.0);
}

TEST(Backward, RequiresForwardCache) {
  Rng rng(46);
  const MetricModel model{EmbeddingNet::random({6, 5}, rng), MetricHead{}};
  const auto batch = random_batch(rng, 3, 1, 2, 6);
  EpisodeForward never;
  EXPECT_THROW(backward(model, never, Matrix::Zero(6, 3)), std::logic_error);
  const auto no_cache = forward_episode(model, batch, false);
  EXPECT_THROW(backward(model, no_cache, Matrix::Zero(6, 3)), std::logic_error);
}

TEST(Backward, SingleLinearLayerHandCase) {
  // emb = W x + b, logit_k = -|W (q - s_k)|^2, upstream d logit = (1, 0):
  // dW = -2 W (q - s_0)(q - s_0)^T, db = 0.
  MetricModel model{EmbeddingNet({2, 2}), MetricHead{Metric::neg_sq_euclidean, 1.0}};
  model.net.weight(0) << 1.0, 2.0, -1.0, 0.5;
  model.net.bias(0) << 0.3, -0.7;
  EpisodeBatch b;
  b.way = 2;
  b.support.resize(2, 2);
  b.support << 1.0, 0.0, 0.0, 1.0;
  b.support_labels = {0, 1};
  b.query.resize(1, 2);
  b.query << 2.0, 1.0;
  b.query_labels = {0};
  const auto f = forward_episode(model, b);
  Matrix up(1, 2);
  up << 1.0, 0.0;
  const auto g = backward_logits(model, f, up);
  Eigen::Vector2d d(1.0, 1.0);  // q - s_0
  Eigen::Matrix2d w;
  w << 1.0, 2.0, -1.0, 0.5;
  const Eigen::Matrix2d want = -2.0 * (w * d) * d.transpose();
  // column-major W then b
  EXPECT_NEAR(g.net[0], want(0, 0), 1e-14);
  EXPECT_NEAR(g.net[1], want(1, 0), 1e-14);
  EXPECT_NEAR(g.net[2], want(0, 1), 1e-14);
  EXPECT_NEAR(g.net[3], want(1, 1), 1e-14);
  EXPECT_NEAR(g.net[4], 0.0, 1e-14);
  EXPECT_NEAR(g.net[5], 0.0, 1e-14);
}

TEST(Backward, EndToEndBelGradient) {
  const auto r = verify::model_gradient();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Backward, EuclideanHeadMatchesFiniteDifferences) {
  Rng rng(47);
  MetricModel model{EmbeddingNet::random({5, 7, 4}, rng), MetricHead{Metric::neg_sq_euclidean, 1.0}};
  for (auto& p : model.net.parameters()) p *= 0.5;
  const auto batch = random_batch(rng, 3, 2, 2, 5);
  // loss = sum of c_qk * logit_qk with fixed random weights
  const Matrix c = random_matrix(rng, 6, 3);
  auto loss = [&] { return forward_episode(model, batch, false).logits.cwiseProduct(c).sum(); };
  const auto f = forward_episode(model, batch);
  const auto g = backward_logits(model, f, c);
  const double h = 1e-6;
  auto params = model.net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = loss();
    params[i] = keep - h;
    const double down = loss();
    params[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    EXPECT_NEAR(g.net[i], fd, 1e-4 * std::max(std::abs(fd), 1e-4)) << "parameter " << i;
  }
}
