#pragma once

// Two-stage training: standard cross-entropy pre-training over all base
// classes, then episodic meta-training of a copy of the pre-trained network
// while the original stays frozen and supplies prior evidence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bel/edl_loss.hpp"
#include "bel/episodes.hpp"
#include "bel/eval.hpp"
#include "bel/fusion.hpp"
#include "bel/model.hpp"
#include "bel/rng.hpp"
#include "bel/sha256.hpp"

namespace bel {

enum class Stage { pretrain, metatrain };
enum class LossKind { ce, label_smooth, bel };

inline const char* to_string(Stage s) { return s == Stage::pretrain ? "pretrain" : "metatrain"; }

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::ce: return "ce";
    case LossKind::label_smooth: return "label_smooth";
    case LossKind::bel: return "bel";
  }
  return "?";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "ce") return LossKind::ce;
  if (s == "label_smooth" || s == "ls") return LossKind::label_smooth;
  if (s == "bel") return LossKind::bel;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  Stage stage = Stage::metatrain;
  LossKind loss = LossKind::bel;
  int epochs = 30;
  int batch_size = 128;
  int episodes_per_epoch = 100;
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<int> lr_decay_epochs;
  double lr_decay_factor = 0.1;
  double eta = 0.4;
  FusionRule fusion_rule = FusionRule::evidence;
  double lambda = 0.04;
  int anneal_epochs = 0;
  double epsilon = 0.1;
  int way = 5;
  int shot = 1;
  int query = 15;
  int val_episodes = 200;
  int ece_bins = 15;
  bool keep_best = true;
  std::vector<int> hidden_dims = {256};
  int embed_dim = 64;
  double init_temperature = 10.0;
  double prior_temperature = 10.0;
  std::uint64_t seed = 0;

  static TrainConfig pretrain_defaults() {
    TrainConfig c;
    c.stage = Stage::pretrain;
    c.loss = LossKind::ce;
    c.epochs = 20;
    c.lr = 0.1;
    c.lr_decay_epochs = {15};
    c.eta = 0.0;
    return c;
  }

  static TrainConfig metatrain_defaults() {
    TrainConfig c;
    c.stage = Stage::metatrain;
    c.epochs = 30;
    c.lr = 0.003;
    c.lr_decay_epochs = {20};
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("TrainConfig: " + m); };
    if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
    if (weight_decay < 0.0) fail("weight_decay must be >= 0");
    if (epochs < 0) fail("epochs must be >= 0");
    if (!(eta >= 0.0) || !std::isfinite(eta)) fail("eta must be >= 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be >= 0");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) fail("epsilon must be in [0, 1)");
    if (way < 2 || shot < 1 || query < 1) fail("need way >= 2, shot >= 1, query >= 1");
    if (ece_bins < 1) fail("ece_bins must be >= 1");
    if (embed_dim < 1) fail("embed_dim must be >= 1");
    if (!(init_temperature > 0.0) || !(prior_temperature > 0.0)) fail("temperatures must be > 0");
    if (stage == Stage::pretrain) {
      if (loss != LossKind::ce) fail("pretraining uses the cross-entropy loss");
      if (batch_size < 1) fail("batch_size must be >= 1");
    } else {
      if (episodes_per_epoch < 1) fail("episodes_per_epoch must be >= 1");
      if (loss != LossKind::bel && eta > 0.0) {
        fail(std::string("eta > 0 requires the bel loss, got loss=") + to_string(loss));
      }
    }
  }

  double lr_at(int epoch) const {
    double out = lr;
    for (int e : lr_decay_epochs) {
      if (epoch >= e) out *= lr_decay_factor;
    }
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["stage"] = to_string(stage);
    j["loss"] = to_string(loss);
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["episodes_per_epoch"] = episodes_per_epoch;
    j["lr"] = lr;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["lr_decay_epochs"] = lr_decay_epochs;
    j["lr_decay_factor"] = lr_decay_factor;
    j["eta"] = eta;
    j["fusion_rule"] = to_string(fusion_rule);
    j["lambda"] = lambda;
    j["anneal_epochs"] = anneal_epochs;
    j["epsilon"] = epsilon;
    j["way"] = way;
    j["shot"] = shot;
    j["query"] = query;
    j["val_episodes"] = val_episodes;
    j["ece_bins"] = ece_bins;
    j["keep_best"] = keep_best;
    j["hidden_dims"] = hidden_dims;
    j["embed_dim"] = embed_dim;
    j["init_temperature"] = init_temperature;
    j["prior_temperature"] = prior_temperature;
    j["seed"] = seed;
    return j;
  }
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double val_ece = 0.0;

  nlohmann::ordered_json to_json() const {
    return {{"epoch", epoch},
            {"lr", lr},
            {"train_loss", train_loss},
            {"train_accuracy", train_accuracy},
            {"val_accuracy", val_accuracy},
            {"val_ece", val_ece}};
  }
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  std::string checkpoint_path;
  nlohmann::ordered_json config;

  std::string epochs_jsonl() const {
    std::string out;
    for (const auto& e : epochs) out += e.to_json().dump() + "\n";
    return out;
  }
};

// -- optimiser ----------------------------------------------------------------

/// SGD with heavy-ball momentum: v = mu v + g + wd p; p -= lr v.
class SgdMomentum {
 public:
  SgdMomentum(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(std::span<double> params, std::span<const double> grads, double lr, std::size_t group) {
    if (params.size() != grads.size()) throw std::invalid_argument("SgdMomentum: size mismatch");
    if (velocity_.size() <= group) velocity_.resize(group + 1);
    auto& v = velocity_[group];
    if (v.size() != params.size()) v.assign(params.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
      v[i] = momentum_ * v[i] + grads[i] + weight_decay_ * params[i];
      params[i] -= lr * v[i];
    }
  }

 private:
  double momentum_;
  double weight_decay_;
  std::vector<std::vector<double>> velocity_;
};

// -- episode objective --------------------------------------------------------

struct LossSettings {
  LossKind kind = LossKind::bel;
  FusionConfig fusion{};
  double lambda = 0.04;
  double epsilon = 0.1;
};

struct EpisodeObjective {
  double loss = 0.0;
  double accuracy = 0.0;
  ModelGradients gradients;
};

/// Mean loss over the query set of one episode and its gradient with respect
/// to the meta model. `prior` (frozen) is only consulted for the bel loss
/// with eta > 0.
inline EpisodeObjective episode_objective(const MetricModel& meta, const MetricModel* prior,
                                          const EpisodeBatch& batch, const LossSettings& s) {
  const EpisodeForward f = forward_episode(meta, batch);
  const Eigen::Index nq = f.logits.rows();
  const int way = batch.way;
  const bool use_prior = s.kind == LossKind::bel && s.fusion.eta > 0.0;
  if (use_prior && prior == nullptr) throw std::invalid_argument("episode_objective: prior model required");
  Matrix prior_evidence;
  if (use_prior) prior_evidence = forward_episode(*prior, batch, false).evidence;

  EpisodeObjective out;
  Matrix d(nq, way);
  std::vector<double> row(way);
  int hits = 0;
  for (Eigen::Index q = 0; q < nq; ++q) {
    const OneHotLabel y(way, static_cast<std::size_t>(batch.query_labels[q]));
    std::vector<double> g;
    Eigen::Index predicted = 0;
    if (s.kind == LossKind::bel) {
      std::vector<double> meta_e(way), prior_e(way, 0.0);
      for (int k = 0; k < way; ++k) {
        meta_e[k] = f.evidence(q, k);
        if (use_prior) prior_e[k] = prior_evidence(q, k);
      }
      const DirichletParams p = use_prior
                                    ? fused_params(Evidence(prior_e), Evidence(meta_e), s.fusion)
                                    : evidence_to_params(Evidence(meta_e));
      out.loss += bel_loss_from_params(p, y, s.lambda).total;
      g = bel_gradient(p, y, s.lambda);
      Eigen::Map<const Vector>(p.alpha().data(), way).maxCoeff(&predicted);
    } else {
      for (int k = 0; k < way; ++k) row[k] = f.logits(q, k);
      if (s.kind == LossKind::ce) {
        out.loss += cross_entropy(row, y);
        g = softmax_ce_gradient(row, y);
      } else {
        out.loss += label_smooth_loss(row, y, s.epsilon);
        g = label_smooth_gradient(row, y, s.epsilon);
      }
      f.logits.row(q).maxCoeff(&predicted);
    }
    if (predicted == batch.query_labels[q]) ++hits;
    for (int k = 0; k < way; ++k) d(q, k) = g[k] / static_cast<double>(nq);
  }
  out.loss /= static_cast<double>(nq);
  out.accuracy = static_cast<double>(hits) / static_cast<double>(nq);
  out.gradients = s.kind == LossKind::bel ? backward(meta, f, d) : backward_logits(meta, f, d);
  return out;
}

// -- prediction -----------------------------------------------------------------

enum class PredictorKind {
  /// probabilities softmax(logits)
  softmax,
  /// probabilities alpha / S with alpha = fused evidence + 1
  evidential,
};

struct Predictor {
  PredictorKind kind = PredictorKind::evidential;
  const MetricModel* model = nullptr;
  const MetricModel* prior = nullptr;
  FusionConfig fusion{0.0, FusionRule::evidence};

  std::vector<PredictionRecord> predict(const EpisodeBatch& batch, int episode_id) const {
    if (!model) throw std::logic_error("Predictor: no model");
    const EpisodeForward f = forward_episode(*model, batch, false);
    Matrix prior_evidence;
    const bool use_prior = kind == PredictorKind::evidential && prior && fusion.eta > 0.0;
    if (use_prior) prior_evidence = forward_episode(*prior, batch, false).evidence;
    const double k = static_cast<double>(batch.way);
    std::vector<PredictionRecord> out;
    out.reserve(static_cast<std::size_t>(f.logits.rows()));
    std::vector<double> probs(batch.way);
    for (Eigen::Index q = 0; q < f.logits.rows(); ++q) {
      PredictionRecord r;
      r.episode = episode_id;
      r.truth = batch.query_labels[q];
      if (kind == PredictorKind::evidential) {
        double s = 0.0;
        for (int j = 0; j < batch.way; ++j) {
          double e = f.evidence(q, j);
          if (use_prior) {
            e += fusion.eta * prior_evidence(q, j) + (fusion.rule == FusionRule::concentration ? fusion.eta : 0.0);
          }
          probs[j] = e + 1.0;
          s += probs[j];
        }
        for (double& p : probs) p /= s;
        r.uncertainty = k / s;
      } else {
        std::vector<double> row(batch.way);
        for (int j = 0; j < batch.way; ++j) row[j] = f.logits(q, j);
        probs = softmax(row);
        r.uncertainty = k / (f.evidence.row(q).sum() + k);
      }
      const auto best = std::max_element(probs.begin(), probs.end());
      r.predicted = static_cast<int>(best - probs.begin());
      r.confidence = *best;
      out.push_back(r);
    }
    return out;
  }
};

inline std::vector<PredictionRecord> evaluate(const Predictor& predictor, const Dataset& d,
                                              std::span<const Episode> stream) {
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    auto r = predictor.predict(materialize(d, stream[i]), static_cast<int>(i));
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

/// Result of meta-training, with the settings the predictor needs.
struct TrainedModel {
  MetricModel model;
  LossKind loss = LossKind::bel;
  FusionConfig fusion{0.0, FusionRule::evidence};
  double lambda = 0.0;
};

/// Pre-trained network with the cosine prototype head (Classifier-Baseline).
inline Predictor classifier_baseline(const MetricModel& pretrained) {
  return Predictor{PredictorKind::softmax, &pretrained, nullptr, {0.0, FusionRule::evidence}};
}

/// Predictor for a meta-trained model. BEL models fuse prior evidence with
/// the eta used in training unless `inference_eta` overrides it.
inline Predictor meta_predictor(const TrainedModel& meta, const MetricModel* pretrained,
                                std::optional<double> inference_eta = std::nullopt) {
  if (meta.loss != LossKind::bel) return Predictor{PredictorKind::softmax, &meta.model, nullptr, meta.fusion};
  FusionConfig fusion = meta.fusion;
  if (inference_eta) fusion.eta = *inference_eta;
  fusion.validate();
  if (fusion.eta > 0.0 && pretrained == nullptr) {
    throw std::invalid_argument("meta_predictor: eta > 0 needs the pre-trained model");
  }
  return Predictor{PredictorKind::evidential, &meta.model, pretrained, fusion};
}

/// Test-time-only fusion of a pre-trained network and a meta network that
/// was trained without prior evidence.
inline Predictor sef_inference_setup(const MetricModel& pretrained, const TrainedModel& meta_without_fusion,
                                     double eta) {
  if (meta_without_fusion.fusion.eta != 0.0) {
    throw std::invalid_argument("sef_inference_setup: meta network was trained with prior fusion");
  }
  FusionConfig fusion{eta, FusionRule::evidence};
  fusion.validate();
  return Predictor{PredictorKind::evidential, &meta_without_fusion.model, &pretrained, fusion};
}

// -- stage 1 ----------------------------------------------------------------------

struct PretrainResult {
  MetricModel model;
  EmbeddingNet classifier;
  std::vector<std::int32_t> class_ids;
  RunRecord record;
};

namespace detail {

inline void check_finite(double loss, const std::string& where) {
  if (!std::isfinite(loss)) throw TrainingDiverged("training diverged: non-finite loss at " + where);
}

inline void check_finite(std::span<const double> values, const char* what, const std::string& where) {
  for (double v : values) {
    if (!std::isfinite(v)) throw TrainingDiverged(std::string("training diverged: non-finite ") + what + " at " + where);
  }
}

/// Validation stream seed, fixed per run so every epoch sees the same episodes.
inline std::uint64_t val_seed(std::uint64_t seed) { return seed ^ 0x5eedf00dULL; }

inline std::vector<Episode> val_stream(const Dataset* val, const TrainConfig& cfg) {
  if (!val || cfg.val_episodes <= 0) return {};
  return consistent_test_stream(*val, cfg.way, cfg.shot, cfg.query, cfg.val_episodes, val_seed(cfg.seed));
}

}  // namespace detail

inline PretrainResult pretrain(const Dataset& base, const Dataset* val, const TrainConfig& cfg,
                               const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (cfg.stage != Stage::pretrain) throw ConfigError("pretrain: config stage must be pretrain");
  if (base.num_samples() == 0) throw ConfigError("pretrain: empty base split");

  Rng rng(cfg.seed);
  std::vector<int> dims{base.input_dim()};
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(cfg.embed_dim);

  PretrainResult res;
  res.model.net = EmbeddingNet::random(dims, rng);
  res.model.head = MetricHead{Metric::cosine, cfg.prior_temperature};
  res.class_ids = base.class_ids();
  const int num_classes = static_cast<int>(res.class_ids.size());
  res.classifier = EmbeddingNet::random({cfg.embed_dim, num_classes}, rng);
  std::map<std::int32_t, int> class_index;
  for (int i = 0; i < num_classes; ++i) class_index[res.class_ids[i]] = i;

  res.record.config = cfg.to_json();
  const auto val_eps = detail::val_stream(val, cfg);
  SgdMomentum opt(cfg.momentum, cfg.weight_decay);
  std::vector<std::size_t> order(base.num_samples());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::optional<std::pair<MetricModel, EmbeddingNet>> best;
  double best_val = -1.0;
  std::vector<double> g_net(res.model.net.num_parameters());
  std::vector<double> g_cls(res.classifier.num_parameters());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> rows(order.data() + start, n);
      const Matrix x = gather_rows(base, rows);
      EmbeddingNet::Cache net_cache, cls_cache;
      const Matrix emb = res.model.net.forward(x, &net_cache);
      const Matrix logits = res.classifier.forward(emb, &cls_cache);
      Matrix d_logits(static_cast<Eigen::Index>(n), num_classes);
      std::vector<double> row(num_classes);
      detail::check_finite(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())), "logits",
                           "pretrain epoch " + std::to_string(epoch));
      for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const OneHotLabel y(num_classes, class_index.at(base.label(rows[i])));
        for (int k = 0; k < num_classes; ++k) row[k] = logits(r, k);
        loss_sum += cross_entropy(row, y);
        Eigen::Index arg = 0;
        logits.row(r).maxCoeff(&arg);
        if (arg == static_cast<Eigen::Index>(y.index())) ++hits;
        const auto g = softmax_ce_gradient(row, y);
        for (int k = 0; k < num_classes; ++k) d_logits(r, k) = g[k] / static_cast<double>(n);
      }
      std::fill(g_net.begin(), g_net.end(), 0.0);
      std::fill(g_cls.begin(), g_cls.end(), 0.0);
      const Matrix d_emb = res.classifier.backward(cls_cache, d_logits, g_cls);
      res.model.net.backward(net_cache, d_emb, g_net);
      opt.step(res.model.net.parameters(), g_net, lr, 0);
      opt.step(res.classifier.parameters(), g_cls, lr, 1);
      detail::check_finite(res.model.net.parameters(), "parameters", "pretrain epoch " + std::to_string(epoch));
      detail::check_finite(res.classifier.parameters(), "parameters", "pretrain epoch " + std::to_string(epoch));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(hits) / static_cast<double>(order.size());
    detail::check_finite(rec.train_loss, "pretrain epoch " + std::to_string(epoch));
    if (!val_eps.empty()) {
      const auto recs = evaluate(classifier_baseline(res.model), *val, val_eps);
      rec.val_accuracy = episode_accuracy(recs).mean;
      rec.val_ece = average_ece_over_episodes(recs, cfg.ece_bins);
      if (cfg.keep_best && rec.val_accuracy > best_val) {
        best_val = rec.val_accuracy;
        best.emplace(res.model, res.classifier);
        res.record.best_epoch = epoch;
      }
    }
    res.record.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (best) {
    res.model = std::move(best->first);
    res.classifier = std::move(best->second);
  } else {
    res.record.best_epoch = cfg.epochs - 1;
  }
  return res;
}

// -- stage 2 ----------------------------------------------------------------------

struct MetatrainResult {
  TrainedModel trained;
  RunRecord record;
};

inline MetatrainResult metatrain(const Dataset& base, const Dataset* val, const MetricModel& pretrained,
                                 const TrainConfig& cfg,
                                 const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (cfg.stage != Stage::metatrain) throw ConfigError("metatrain: config stage must be metatrain");

  MetricModel prior = pretrained;
  prior.head = MetricHead{Metric::cosine, cfg.prior_temperature};

  MetatrainResult res;
  res.trained.model = pretrained;
  res.trained.model.head = MetricHead{Metric::cosine, cfg.init_temperature};
  res.trained.loss = cfg.loss;
  res.trained.fusion = FusionConfig{cfg.loss == LossKind::bel ? cfg.eta : 0.0, cfg.fusion_rule};
  res.trained.lambda = cfg.lambda;
  res.record.config = cfg.to_json();

  const LossConfig loss_cfg{cfg.lambda, cfg.anneal_epochs};
  const auto val_eps = detail::val_stream(val, cfg);
  Rng rng(cfg.seed);
  SgdMomentum opt(cfg.momentum, cfg.weight_decay);
  std::optional<MetricModel> best;
  double best_val = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    const LossSettings settings{cfg.loss, res.trained.fusion, loss_cfg.lambda_at(epoch), cfg.epsilon};
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    for (int e = 0; e < cfg.episodes_per_epoch; ++e) {
      const Episode ep = sample_episode(base, cfg.way, cfg.shot, cfg.query, rng);
      const EpisodeObjective obj = episode_objective(res.trained.model, &prior, materialize(base, ep), settings);
      detail::check_finite(obj.loss, "metatrain epoch " + std::to_string(epoch) + " episode " + std::to_string(e));
      loss_sum += obj.loss;
      acc_sum += obj.accuracy;
      opt.step(res.trained.model.net.parameters(), obj.gradients.net, lr, 0);
      double temperature = res.trained.model.head.temperature;
      opt.step(std::span(&temperature, 1), std::span(&obj.gradients.temperature, 1), lr, 1);
      res.trained.model.head.temperature = std::max(temperature, 1e-3);
      detail::check_finite(res.trained.model.net.parameters(), "parameters",
                           "metatrain epoch " + std::to_string(epoch) + " episode " + std::to_string(e));
      detail::check_finite(temperature, "metatrain epoch " + std::to_string(epoch) + " episode " + std::to_string(e));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / cfg.episodes_per_epoch;
    rec.train_accuracy = acc_sum / cfg.episodes_per_epoch;
    if (!val_eps.empty()) {
      const auto recs = evaluate(meta_predictor(res.trained, &prior), *val, val_eps);
      rec.val_accuracy = episode_accuracy(recs).mean;
      rec.val_ece = average_ece_over_episodes(recs, cfg.ece_bins);
      if (cfg.keep_best && rec.val_accuracy > best_val) {
        best_val = rec.val_accuracy;
        best = res.trained.model;
        res.record.best_epoch = epoch;
      }
    }
    res.record.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (best) {
    res.trained.model = std::move(*best);
  } else {
    res.record.best_epoch = cfg.epochs - 1;
  }
  return res;
}

/// Digest of parameters; equal digests mean bit-identical models.
inline std::string parameter_digest(const MetricModel& m) {
  const auto p = m.net.parameters();
  std::string bytes(reinterpret_cast<const char*>(p.data()), p.size() * sizeof(double));
  bytes.append(reinterpret_cast<const char*>(&m.head.temperature), sizeof(double));
  return sha256_hex(bytes);
}

}  // namespace bel
