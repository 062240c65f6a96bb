#pragma once

// Fully connected embedding network and prototype metric head with
// hand-written forward/backward passes. Rows of every batch matrix are
// samples.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bel/rng.hpp"

namespace bel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Logits are clamped to [-kLogitClamp, kLogitClamp] before exp().
inline constexpr double kLogitClamp = 15.0;

/// Affine layers with a rectifier between them. The last layer is linear
/// unless activate_output is set. Parameters live in one flat buffer,
/// layer by layer: W_l (out x in, column-major) followed by b_l.
class EmbeddingNet {
 public:
  struct Cache {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation output of each layer
  };

  EmbeddingNet() = default;

  /// Zero-initialised network.
  explicit EmbeddingNet(std::vector<int> dims, bool activate_output = false)
      : dims_(std::move(dims)), activate_output_(activate_output) {
    if (dims_.size() < 2) throw std::invalid_argument("EmbeddingNet: need at least one layer");
    for (int d : dims_) {
      if (d <= 0) throw std::invalid_argument("EmbeddingNet: layer widths must be positive");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      offsets_.push_back(offset);
      offset += static_cast<std::size_t>(dims_[l + 1]) * (dims_[l] + 1);
    }
    params_.assign(offset, 0.0);
  }

  /// Uniform fan-in initialisation, W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), b = 0.
  static EmbeddingNet random(std::vector<int> dims, Rng& rng, bool activate_output = false) {
    EmbeddingNet net(std::move(dims), activate_output);
    for (int l = 0; l < net.num_layers(); ++l) {
      const double bound = std::sqrt(6.0 / net.dims_[l]);
      auto w = net.weight(l);
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
      }
    }
    return net;
  }

  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
  int input_dim() const { return dims_.front(); }
  int embed_dim() const { return dims_.back(); }
  const std::vector<int>& dims() const { return dims_; }
  bool activate_output() const { return activate_output_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t num_parameters() const { return params_.size(); }

  Eigen::Map<Matrix> weight(int l) {
    return {params_.data() + offsets_[l], dims_[l + 1], dims_[l]};
  }
  Eigen::Map<const Matrix> weight(int l) const {
    return {params_.data() + offsets_[l], dims_[l + 1], dims_[l]};
  }
  Eigen::Map<Vector> bias(int l) {
    return {params_.data() + offsets_[l] + static_cast<std::size_t>(dims_[l + 1]) * dims_[l],
            dims_[l + 1]};
  }
  Eigen::Map<const Vector> bias(int l) const {
    return {params_.data() + offsets_[l] + static_cast<std::size_t>(dims_[l + 1]) * dims_[l],
            dims_[l + 1]};
  }

  bool activated(int l) const { return l + 1 < num_layers() || activate_output_; }

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const {
    if (x.cols() != input_dim()) {
      throw std::invalid_argument("EmbeddingNet::forward: expected " + std::to_string(input_dim()) +
                                  " features, got " + std::to_string(x.cols()));
    }
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    Matrix h = x;
    for (int l = 0; l < num_layers(); ++l) {
      Matrix z = h * weight(l).transpose();
      z.rowwise() += bias(l).transpose();
      if (cache) {
        cache->inputs.push_back(std::move(h));
        cache->pre.push_back(z);
      }
      h = activated(l) ? Matrix(z.cwiseMax(0.0)) : std::move(z);
    }
    return h;
  }

  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(output);
  /// returns d(loss)/d(input).
  Matrix backward(const Cache& cache, const Matrix& d_out, std::span<double> grad) const {
    if (cache.inputs.size() != static_cast<std::size_t>(num_layers())) {
      throw std::logic_error("EmbeddingNet::backward: no forward cache");
    }
    if (grad.size() != params_.size()) {
      throw std::invalid_argument("EmbeddingNet::backward: gradient buffer size mismatch");
    }
    Matrix d = d_out;
    for (int l = num_layers() - 1; l >= 0; --l) {
      if (activated(l)) d = d.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
      Eigen::Map<Matrix> dw(grad.data() + offsets_[l], dims_[l + 1], dims_[l]);
      Eigen::Map<Vector> db(
          grad.data() + offsets_[l] + static_cast<std::size_t>(dims_[l + 1]) * dims_[l],
          dims_[l + 1]);
      dw.noalias() += d.transpose() * cache.inputs[l];
      db += d.colwise().sum().transpose();
      d = d * weight(l);
    }
    return d;
  }

 private:
  std::vector<int> dims_;
  bool activate_output_ = false;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Embedding of a single feature vector.
inline Vector embed(const EmbeddingNet& net, const Vector& x, EmbeddingNet::Cache* cache = nullptr) {
  return net.forward(x.transpose(), cache).row(0).transpose();
}

enum class Metric { cosine, neg_sq_euclidean };

inline const char* to_string(Metric m) { return m == Metric::cosine ? "cosine" : "euclidean"; }

inline Metric metric_from_string(const std::string& s) {
  if (s == "cosine") return Metric::cosine;
  if (s == "euclidean") return Metric::neg_sq_euclidean;
  throw std::invalid_argument("unknown metric '" + s + "'");
}

struct MetricHead {
  Metric metric = Metric::cosine;
  /// Scale on cosine logits; unused by the euclidean metric.
  double temperature = 10.0;

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      throw std::invalid_argument("MetricHead: temperature must be positive");
    }
  }
};

struct EvidenceOutput {
  std::vector<double> logits;
  std::vector<double> evidence;
};

inline double clamp_logit(double z) { return std::clamp(z, -kLogitClamp, kLogitClamp); }
inline double logit_evidence(double z) { return std::exp(clamp_logit(z)); }

/// Class means of the rows of `embeddings`, grouped by `labels` in [0, way).
inline Matrix prototypes(const Matrix& embeddings, std::span<const int> labels, int way) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) {
    throw std::invalid_argument("prototypes: one label per embedding required");
  }
  Matrix protos = Matrix::Zero(way, embeddings.cols());
  std::vector<int> counts(way, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= way) throw std::invalid_argument("prototypes: label out of range");
    protos.row(labels[i]) += embeddings.row(static_cast<Eigen::Index>(i));
    ++counts[labels[i]];
  }
  for (int k = 0; k < way; ++k) {
    if (counts[k] == 0) {
      throw std::invalid_argument("prototypes: class " + std::to_string(k) + " has no support");
    }
    protos.row(k) /= counts[k];
  }
  return protos;
}

inline EvidenceOutput evidence_logits(const MetricHead& head, const Vector& query,
                                      const Matrix& protos) {
  head.validate();
  if (query.size() != protos.cols()) throw std::invalid_argument("evidence_logits: dimension mismatch");
  EvidenceOutput out;
  const double qn = query.norm();
  for (Eigen::Index k = 0; k < protos.rows(); ++k) {
    double z = 0.0;
    if (head.metric == Metric::cosine) {
      const double cn = protos.row(k).norm();
      if (qn == 0.0 || cn == 0.0) throw std::domain_error("evidence_logits: zero-norm vector under cosine");
      z = head.temperature * protos.row(k).dot(query) / (qn * cn);
    } else {
      z = -(protos.row(k).transpose() - query).squaredNorm();
    }
    out.logits.push_back(z);
    out.evidence.push_back(logit_evidence(z));
  }
  return out;
}

/// Embedding network plus metric head; the unit that is trained and frozen.
struct MetricModel {
  EmbeddingNet net;
  MetricHead head;
};

/// One episode with features already gathered into matrices.
struct EpisodeBatch {
  int way = 0;
  Matrix support;
  std::vector<int> support_labels;
  Matrix query;
  std::vector<int> query_labels;
};

/// Cached forward state of one episode; needed for backward().
struct EpisodeForward {
  bool valid = false;
  int way = 0;
  Eigen::Index n_support = 0;
  std::vector<int> support_labels;
  std::vector<int> class_counts;
  EmbeddingNet::Cache net_cache;
  Matrix support_emb;
  Matrix query_emb;
  Matrix protos;
  Vector query_norm;
  Vector proto_norm;
  Matrix cosine;    // query x way, cosine metric only
  Matrix logits;    // query x way, before clamping
  Matrix evidence;  // exp(clamped logits)
};

struct ModelGradients {
  std::vector<double> net;
  double temperature = 0.0;
};

inline EpisodeForward forward_episode(const MetricModel& model, const EpisodeBatch& batch,
                                      bool keep_cache = true) {
  model.head.validate();
  EpisodeForward f;
  f.way = batch.way;
  f.n_support = batch.support.rows();
  f.support_labels = batch.support_labels;
  Matrix stacked(batch.support.rows() + batch.query.rows(), batch.support.cols());
  stacked << batch.support, batch.query;
  const Matrix emb = model.net.forward(stacked, keep_cache ? &f.net_cache : nullptr);
  f.support_emb = emb.topRows(f.n_support);
  f.query_emb = emb.bottomRows(batch.query.rows());
  f.protos = prototypes(f.support_emb, f.support_labels, f.way);
  f.class_counts.assign(f.way, 0);
  for (int label : f.support_labels) ++f.class_counts[label];

  if (model.head.metric == Metric::cosine) {
    f.query_norm = f.query_emb.rowwise().norm();
    f.proto_norm = f.protos.rowwise().norm();
    if ((f.query_norm.array() == 0.0).any() || (f.proto_norm.array() == 0.0).any()) {
      throw std::domain_error("forward_episode: zero-norm embedding under cosine metric");
    }
    const Matrix qhat = f.query_norm.cwiseInverse().asDiagonal() * f.query_emb;
    const Matrix chat = f.proto_norm.cwiseInverse().asDiagonal() * f.protos;
    f.cosine = qhat * chat.transpose();
    f.logits = model.head.temperature * f.cosine;
  } else {
    f.logits.resize(f.query_emb.rows(), f.way);
    for (Eigen::Index q = 0; q < f.query_emb.rows(); ++q) {
      for (int k = 0; k < f.way; ++k) {
        f.logits(q, k) = -(f.query_emb.row(q) - f.protos.row(k)).squaredNorm();
      }
    }
  }
  f.evidence = f.logits.unaryExpr([](double z) { return logit_evidence(z); });
  f.valid = keep_cache;
  return f;
}

/// Parameter gradients given d(loss)/d(logits).
inline ModelGradients backward_logits(const MetricModel& model, const EpisodeForward& f,
                                      const Matrix& d_logits) {
  if (!f.valid) throw std::logic_error("backward called before forward (or without cache)");
  if (d_logits.rows() != f.logits.rows() || d_logits.cols() != f.logits.cols()) {
    throw std::invalid_argument("backward_logits: gradient shape mismatch");
  }
  ModelGradients g;
  g.net.assign(model.net.num_parameters(), 0.0);
  Matrix d_query(f.query_emb.rows(), f.query_emb.cols());
  Matrix d_protos(f.protos.rows(), f.protos.cols());

  if (model.head.metric == Metric::cosine) {
    g.temperature = d_logits.cwiseProduct(f.cosine).sum();
    const Matrix d_cos = model.head.temperature * d_logits;
    const Matrix qhat = f.query_norm.cwiseInverse().asDiagonal() * f.query_emb;
    const Matrix chat = f.proto_norm.cwiseInverse().asDiagonal() * f.protos;
    const Matrix d_qhat = d_cos * chat;
    const Matrix d_chat = d_cos.transpose() * qhat;
    // d v = (d vhat - vhat (vhat . d vhat)) / |v|
    const Vector q_dot = qhat.cwiseProduct(d_qhat).rowwise().sum();
    d_query = f.query_norm.cwiseInverse().asDiagonal() * (d_qhat - q_dot.asDiagonal() * qhat);
    const Vector c_dot = chat.cwiseProduct(d_chat).rowwise().sum();
    d_protos = f.proto_norm.cwiseInverse().asDiagonal() * (d_chat - c_dot.asDiagonal() * chat);
  } else {
    d_query.setZero();
    d_protos.setZero();
    for (Eigen::Index q = 0; q < f.query_emb.rows(); ++q) {
      for (int k = 0; k < f.way; ++k) {
        const Eigen::RowVectorXd diff = f.query_emb.row(q) - f.protos.row(k);
        d_query.row(q) -= 2.0 * d_logits(q, k) * diff;
        d_protos.row(k) += 2.0 * d_logits(q, k) * diff;
      }
    }
  }

  Matrix d_emb(f.n_support + f.query_emb.rows(), f.query_emb.cols());
  for (Eigen::Index i = 0; i < f.n_support; ++i) {
    const int label = f.support_labels[i];
    d_emb.row(i) = d_protos.row(label) / f.class_counts[label];
  }
  d_emb.bottomRows(f.query_emb.rows()) = d_query;
  model.net.backward(f.net_cache, d_emb, g.net);
  return g;
}

/// Parameter gradients given d(loss)/d(alpha). Meta evidence enters alpha
/// additively under either fusion rule, so d alpha / d logit = exp(logit)
/// inside the clamp range and 0 outside it.
inline ModelGradients backward(const MetricModel& model, const EpisodeForward& f,
                               const Matrix& d_alpha) {
  if (!f.valid) throw std::logic_error("backward called before forward (or without cache)");
  Matrix d_logits = d_alpha.cwiseProduct(f.evidence);
  for (Eigen::Index i = 0; i < d_logits.size(); ++i) {
    if (std::abs(f.logits(i)) >= kLogitClamp) d_logits(i) = 0.0;
  }
  return backward_logits(model, f, d_logits);
}

}  // namespace bel
