#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "bel/checkpoint.hpp"
#include "bel/train.hpp"

using namespace bel;

namespace {

SyntheticSpec tiny_spec(double spread = 1.0) {
  SyntheticSpec s;
  s.base_classes = 10;
  s.val_classes = 5;
  s.novel_classes = 6;
  s.samples_per_class = 30;
  s.input_dim = 16;
  s.signal_dim = 8;
  s.cluster_spread = spread;
  s.nuisance_spread = spread;
  s.seed = 17;
  return s;
}

TrainConfig tiny_pretrain(int epochs = 3) {
  auto c = TrainConfig::pretrain_defaults();
  c.epochs = epochs;
  c.lr_decay_epochs = {};
  c.batch_size = 32;
  c.hidden_dims = {24};
  c.embed_dim = 12;
  c.val_episodes = 20;
  c.seed = 5;
  return c;
}

TrainConfig tiny_meta(LossKind loss, double eta, int epochs = 2) {
  auto c = TrainConfig::metatrain_defaults();
  c.loss = loss;
  c.eta = eta;
  c.epochs = epochs;
  c.lr_decay_epochs = {};
  c.episodes_per_epoch = 20;
  c.val_episodes = 10;
  c.query = 5;
  c.seed = 6;
  return c;
}

struct Fixture {
  DatasetSplits data = generate_synthetic(tiny_spec());
  PretrainResult pre = pretrain(data.base, &data.val, tiny_pretrain());
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(TrainConfig, Validation) {
  auto c = TrainConfig::metatrain_defaults();
  EXPECT_NO_THROW(c.validate());
  c.loss = LossKind::ce;
  c.eta = 0.4;
  EXPECT_THROW(c.validate(), ConfigError);
  c.eta = 0.0;
  EXPECT_NO_THROW(c.validate());
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  auto p = TrainConfig::pretrain_defaults();
  p.loss = LossKind::bel;
  EXPECT_THROW(p.validate(), ConfigError);
  p = TrainConfig::pretrain_defaults();
  p.lr = -1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_THROW(metatrain(fixture().data.base, nullptr, fixture().pre.model, tiny_pretrain()), ConfigError);
}

TEST(TrainConfig, StepDecay) {
  auto c = TrainConfig::metatrain_defaults();
  c.lr = 0.1;
  c.lr_decay_epochs = {2, 4};
  EXPECT_EQ(c.lr_at(0), 0.1);
  EXPECT_DOUBLE_EQ(c.lr_at(2), 0.01);
  EXPECT_DOUBLE_EQ(c.lr_at(5), 0.001);
}

TEST(Sgd, MomentumStep) {
  SgdMomentum opt(0.9, 0.0);
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.5, 1.0};
  opt.step(p, g, 0.1, 0);
  EXPECT_NEAR(p[0], 1.0 - 0.05, 1e-15);
  EXPECT_NEAR(p[1], -2.0 - 0.1, 1e-15);
  opt.step(p, g, 0.1, 0);
  // v = 0.9 * 0.5 + 0.5 = 0.95
  EXPECT_NEAR(p[0], 0.95 - 0.095, 1e-15);
}

TEST(Pretrain, SeparableDataIsLearned) {
  const auto d = generate_synthetic(tiny_spec(0.0));
  auto cfg = tiny_pretrain(5);
  cfg.val_episodes = 0;
  const auto r = pretrain(d.base, nullptr, cfg);
  EXPECT_EQ(r.record.epochs.back().train_accuracy, 1.0);
}

TEST(Pretrain, ZeroLearningRateLeavesParameters) {
  const auto& d = fixture().data;
  auto cfg = tiny_pretrain(0);
  const auto init = pretrain(d.base, nullptr, cfg);
  cfg.epochs = 2;
  cfg.lr = 0.0;
  cfg.val_episodes = 0;
  const auto r = pretrain(d.base, nullptr, cfg);
  EXPECT_EQ(parameter_digest(r.model), parameter_digest(init.model));
}

TEST(Pretrain, Deterministic) {
  const auto& d = fixture().data;
  const auto a = pretrain(d.base, &d.val, tiny_pretrain(2));
  const auto b = pretrain(d.base, &d.val, tiny_pretrain(2));
  EXPECT_EQ(parameter_digest(a.model), parameter_digest(b.model));
  EXPECT_EQ(a.record.epochs_jsonl(), b.record.epochs_jsonl());
  EXPECT_EQ(a.record.config, b.record.config);
}

int rising_epochs(const RunRecord& r) {
  int up = 0;
  for (std::size_t i = 1; i < r.epochs.size(); ++i) up += r.epochs[i].train_loss > r.epochs[i - 1].train_loss;
  return up;
}

TEST(Training, LossTrendsDownOnSeparableData) {
  const auto d = generate_synthetic(tiny_spec(0.1));
  auto cfg = tiny_pretrain(10);
  cfg.val_episodes = 0;
  const auto pre = pretrain(d.base, nullptr, cfg);
  EXPECT_LE(rising_epochs(pre.record), 2);  // at most 20% of epochs
  EXPECT_LT(pre.record.epochs.back().train_loss, pre.record.epochs.front().train_loss);

  auto mc = tiny_meta(LossKind::bel, 0.0, 10);
  mc.val_episodes = 0;
  const auto meta = metatrain(d.base, nullptr, pre.model, mc);
  EXPECT_LE(rising_epochs(meta.record), 2);
  EXPECT_LT(meta.record.epochs.back().train_loss, meta.record.epochs.front().train_loss);
}

TEST(Pretrain, DivergenceIsReported) {
  const auto& d = fixture().data;
  auto cfg = tiny_pretrain(3);
  cfg.lr = 1e200;
  cfg.val_episodes = 0;
  EXPECT_THROW(pretrain(d.base, nullptr, cfg), TrainingDiverged);
}

TEST(Metatrain, FrozenPriorAndDeterminism) {
  const auto& f = fixture();
  const std::string before = parameter_digest(f.pre.model);
  const auto a = metatrain(f.data.base, &f.data.val, f.pre.model, tiny_meta(LossKind::bel, 0.4));
  EXPECT_EQ(parameter_digest(f.pre.model), before);
  const auto b = metatrain(f.data.base, &f.data.val, f.pre.model, tiny_meta(LossKind::bel, 0.4));
  EXPECT_EQ(parameter_digest(a.trained.model), parameter_digest(b.trained.model));
  EXPECT_EQ(a.record.epochs_jsonl(), b.record.epochs_jsonl());
  EXPECT_NE(parameter_digest(a.trained.model), before);
  EXPECT_EQ(a.record.epochs.size(), 2u);
  EXPECT_EQ(a.record.epochs[1].epoch, 1);
}

TEST(Metatrain, LossVariants) {
  const auto& f = fixture();
  const auto no_prior = metatrain(f.data.base, nullptr, f.pre.model, tiny_meta(LossKind::bel, 0.0));
  EXPECT_EQ(no_prior.trained.fusion.eta, 0.0);
  EXPECT_EQ(meta_predictor(no_prior.trained, nullptr).prior, nullptr);
  const auto ce = metatrain(f.data.base, nullptr, f.pre.model, tiny_meta(LossKind::ce, 0.0));
  EXPECT_EQ(meta_predictor(ce.trained, nullptr).kind, PredictorKind::softmax);
  auto ls_cfg = tiny_meta(LossKind::label_smooth, 0.0);
  ls_cfg.epsilon = 0.1;
  const auto ls = metatrain(f.data.base, nullptr, f.pre.model, ls_cfg);
  for (const auto* r : {&no_prior.record, &ce.record, &ls.record}) {
    for (const auto& e : r->epochs) EXPECT_TRUE(std::isfinite(e.train_loss));
  }
  const auto fused = metatrain(f.data.base, nullptr, f.pre.model, tiny_meta(LossKind::bel, 0.4));
  EXPECT_THROW(meta_predictor(fused.trained, nullptr), std::invalid_argument);
  EXPECT_NO_THROW(meta_predictor(fused.trained, nullptr, 0.0));
}

TEST(EpisodeObjective, SoftmaxPathsMatchFiniteDifferences) {
  Rng rng(61);
  MetricModel model{EmbeddingNet::random({6, 8, 5}, rng), MetricHead{Metric::cosine, 4.0}};
  EpisodeBatch b;
  b.way = 3;
  b.support = Matrix::NullaryExpr(3, 6, [&] { return rng.normal(); });
  b.query = Matrix::NullaryExpr(6, 6, [&] { return rng.normal(); });
  b.support_labels = {0, 1, 2};
  b.query_labels = {0, 1, 2, 0, 1, 2};
  for (auto kind : {LossKind::ce, LossKind::label_smooth}) {
    const LossSettings s{kind, FusionConfig{0.0}, 0.0, 0.2};
    const auto obj = episode_objective(model, nullptr, b, s);
    auto params = model.net.parameters();
    const double h = 1e-6;
    for (std::size_t i = 0; i < params.size(); i += 3) {
      const double keep = params[i];
      params[i] = keep + h;
      const double up = episode_objective(model, nullptr, b, s).loss;
      params[i] = keep - h;
      const double down = episode_objective(model, nullptr, b, s).loss;
      params[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      EXPECT_NEAR(obj.gradients.net[i], fd, 1e-4 * std::max(std::abs(fd), 1e-4)) << to_string(kind) << " " << i;
    }
  }
}

TEST(Sef, Reductions) {
  const auto& f = fixture();
  const auto meta = metatrain(f.data.base, nullptr, f.pre.model, tiny_meta(LossKind::bel, 0.0));
  const auto stream = consistent_test_stream(f.data.novel, 5, 1, 5, 20, 3);

  const auto plain = evaluate(meta_predictor(meta.trained, nullptr), f.data.novel, stream);
  const auto sef0 = evaluate(sef_inference_setup(f.pre.model, meta.trained, 0.0), f.data.novel, stream);
  ASSERT_EQ(plain.size(), sef0.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    EXPECT_EQ(plain[i].predicted, sef0[i].predicted);
    EXPECT_EQ(plain[i].confidence, sef0[i].confidence);
    EXPECT_EQ(plain[i].uncertainty, sef0[i].uncertainty);
  }

  // same network on both sides, eta = 1: evidence doubles, argmax is kept
  TrainedModel same{f.pre.model, LossKind::bel, FusionConfig{0.0}, 0.04};
  same.model.head = MetricHead{Metric::cosine, f.pre.model.head.temperature};
  const auto alone = evaluate(meta_predictor(same, nullptr), f.data.novel, stream);
  const auto doubled = evaluate(sef_inference_setup(f.pre.model, same, 1.0), f.data.novel, stream);
  for (std::size_t i = 0; i < alone.size(); ++i) {
    EXPECT_EQ(alone[i].predicted, doubled[i].predicted);
    const double k = 5.0;
    // u = K / (sum e + K) with sum e doubled
    const double sum_e = k / alone[i].uncertainty - k;
    EXPECT_NEAR(doubled[i].uncertainty, k / (2.0 * sum_e + k), 1e-12);
  }

  TrainedModel fused = meta.trained;
  fused.fusion.eta = 0.4;
  EXPECT_THROW(sef_inference_setup(f.pre.model, fused, 0.4), std::invalid_argument);
}

TEST(Predictor, EvidentialConfidenceAndUncertainty) {
  const auto& f = fixture();
  TrainedModel m{f.pre.model, LossKind::bel, FusionConfig{0.0}, 0.04};
  const auto stream = consistent_test_stream(f.data.novel, 5, 1, 5, 10, 4);
  for (const auto& r : evaluate(meta_predictor(m, nullptr), f.data.novel, stream)) {
    EXPECT_GE(r.confidence, 1.0 / 5.0);
    EXPECT_LE(r.confidence, 1.0);
    EXPECT_GT(r.uncertainty, 0.0);
    EXPECT_LE(r.uncertainty, 1.0);
  }
}

TEST(Checkpoint, RoundTrip) {
  const auto& f = fixture();
  const auto pj = pretrained_to_json(f.pre);
  EXPECT_EQ(parameter_digest(model_from_json(nlohmann::json::parse(pj.dump()))), parameter_digest(f.pre.model));

  TrainedModel t{f.pre.model, LossKind::bel, FusionConfig{0.4, FusionRule::concentration}, 0.06};
  t.model.head.temperature = 7.25;
  const auto back = trained_from_json(nlohmann::json::parse(trained_to_json(t).dump(1)));
  EXPECT_EQ(parameter_digest(back.model), parameter_digest(t.model));
  EXPECT_EQ(back.loss, LossKind::bel);
  EXPECT_EQ(back.fusion.eta, 0.4);
  EXPECT_EQ(back.fusion.rule, FusionRule::concentration);
  EXPECT_EQ(back.lambda, 0.06);

  auto bad = trained_to_json(t);
  bad["net"]["parameters"].erase(0);
  EXPECT_THROW(trained_from_json(nlohmann::json::parse(bad.dump())), CheckpointError);
  bad = trained_to_json(t);
  bad["format_version"] = 99;
  EXPECT_THROW(trained_from_json(nlohmann::json::parse(bad.dump())), CheckpointError);
  EXPECT_THROW(trained_from_json(nlohmann::json::parse(pj.dump())), CheckpointError);
}
