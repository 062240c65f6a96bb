// bel: data generation, two-stage training, evaluation, ablation sweeps and
// self-test for evidential few-shot classification.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure,
// 4 self-test failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bel/checkpoint.hpp"
#include "bel/episodes.hpp"
#include "bel/eval.hpp"
#include "bel/sha256.hpp"
#include "bel/train.hpp"
#include "bel/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitSelftest = 4;

struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ordered_json version_stamp() {
  return {{"version", BEL_VERSION}, {"git", BEL_GIT_DESCRIBE}};
}

struct LoadedData {
  bel::DatasetSplits splits;
  ordered_json hashes;
};

LoadedData load_data_dir(const fs::path& dir) {
  auto load = [&](const char* name, bel::Split expect) {
    const fs::path p = dir / (std::string(name) + ".belf");
    bel::Dataset d = bel::load_feature_file(p.string());
    if (d.split() != expect) {
      throw bel::DatasetError(p.string() + ": header says split " + bel::to_string(d.split()));
    }
    return d;
  };
  LoadedData out{{load("base", bel::Split::base), load("val", bel::Split::val), load("novel", bel::Split::novel)}, {}};
  out.splits.check();
  for (const char* name : {"base", "val", "novel"}) {
    out.hashes[name] = bel::sha256_hex(bel::read_file_bytes((dir / (std::string(name) + ".belf")).string()));
  }
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + p.string());
  out << text;
  if (!out) throw RuntimeFailure("write failed: " + p.string());
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw RuntimeFailure("cannot create " + p.string() + ": " + ec.message());
}

void write_manifest(const fs::path& dir, const std::string& command, const ordered_json& config,
                    const ordered_json& inputs) {
  ordered_json m;
  m["command"] = command;
  m["code"] = version_stamp();
  m["config"] = config;
  m["inputs"] = inputs;
  bel::write_json_file(dir / "manifest.json", m);
}

std::string checkpoint_digest(const fs::path& p) { return bel::sha256_hex(bel::read_file_bytes(p.string())); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// -- option groups ------------------------------------------------------------------

struct EpisodeOptions {
  int way = 5;
  int shot = 1;
  int query = 15;
  int episodes = 600;
  std::uint64_t seed = 2023;
  int ece_bins = 15;

  void add(CLI::App* app) {
    app->add_option("--way", way, "classes per episode")->capture_default_str();
    app->add_option("--shot", shot, "support samples per class")->capture_default_str();
    app->add_option("--query", query, "query samples per class")->capture_default_str();
    app->add_option("--episodes", episodes, "test episodes")->capture_default_str();
    app->add_option("--seed", seed, "test stream seed")->capture_default_str();
    app->add_option("--ece-bins", ece_bins, "ECE bin count")->capture_default_str();
  }

  ordered_json to_json() const {
    return {{"way", way}, {"shot", shot}, {"query", query}, {"episodes", episodes}, {"seed", seed},
            {"ece_bins", ece_bins}};
  }
};

void add_train_options(CLI::App* app, bel::TrainConfig& c, bool meta, std::string& loss, std::string& rule) {
  app->add_option("--epochs", c.epochs)->capture_default_str();
  app->add_option("--lr", c.lr, "learning rate")->capture_default_str();
  app->add_option("--momentum", c.momentum)->capture_default_str();
  app->add_option("--weight-decay", c.weight_decay)->capture_default_str();
  app->add_option("--lr-decay-epochs", c.lr_decay_epochs, "epochs at which lr is multiplied by the decay factor");
  app->add_option("--lr-decay-factor", c.lr_decay_factor)->capture_default_str();
  app->add_option("--train-seed", c.seed, "training seed")->capture_default_str();
  app->add_option("--val-episodes", c.val_episodes, "validation episodes per epoch")->capture_default_str();
  app->add_option("--way", c.way)->capture_default_str();
  app->add_option("--shot", c.shot)->capture_default_str();
  app->add_option("--query", c.query)->capture_default_str();
  app->add_option("--ece-bins", c.ece_bins)->capture_default_str();
  app->add_option("--prior-temperature", c.prior_temperature)->capture_default_str();
  app->add_flag("!--no-keep-best", c.keep_best, "keep the final rather than the best-validation weights");
  if (meta) {
    app->add_option("--loss", loss, "ce | label_smooth | bel")->capture_default_str();
    app->add_option("--eta", c.eta, "prior evidence weight")->capture_default_str();
    app->add_option("--lambda", c.lambda, "KL weight")->capture_default_str();
    app->add_option("--epsilon", c.epsilon, "label smoothing factor")->capture_default_str();
    app->add_option("--anneal-epochs", c.anneal_epochs, "linear lambda warm-up epochs (0 = off)")
        ->capture_default_str();
    app->add_option("--fusion-rule", rule, "evidence | concentration")->capture_default_str();
    app->add_option("--episodes-per-epoch", c.episodes_per_epoch)->capture_default_str();
    app->add_option("--init-temperature", c.init_temperature)->capture_default_str();
  } else {
    app->add_option("--batch-size", c.batch_size)->capture_default_str();
    app->add_option("--hidden", c.hidden_dims, "hidden layer widths")->delimiter(',');
    app->add_option("--embed-dim", c.embed_dim)->capture_default_str();
  }
}

void finish_meta_config(bel::TrainConfig& c, const std::string& loss, const std::string& rule) {
  try {
    c.loss = bel::loss_kind_from_string(loss);
    c.fusion_rule = bel::fusion_rule_from_string(rule);
  } catch (const std::invalid_argument& e) {
    throw bel::ConfigError(e.what());
  }
  c.validate();
}

void print_epoch(const char* stage, const bel::EpochRecord& r) {
  std::printf("[%s] epoch %3d  lr %.4g  loss %.4f  train-acc %.4f  val-acc %.4f  val-ece %.4f\n", stage, r.epoch,
              r.lr, r.train_loss, r.train_accuracy, r.val_accuracy, r.val_ece);
  std::fflush(stdout);
}

bel::MetricModel load_pretrained(const fs::path& p) {
  const auto j = bel::read_json_file(p);
  if (j.value("kind", "") != "pretrained") throw bel::CheckpointError(p.string() + ": not a pre-trained checkpoint");
  return bel::model_from_json(j);
}

// -- ablation ---------------------------------------------------------------------------

struct GridPoint {
  double lambda = 0.0;
  double eta = 0.0;
  bool ok = false;
  std::string error;
  double accuracy = 0.0;
  double ci95 = 0.0;
  double ece = 0.0;
  std::string stream_digest;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian evidential learning for few-shot classification"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset (or convert CSV files)");
  bel::SyntheticSpec spec;
  std::string gen_out;
  std::string from_csv;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", spec.seed)->capture_default_str();
  gen->add_option("--base-classes", spec.base_classes)->capture_default_str();
  gen->add_option("--val-classes", spec.val_classes)->capture_default_str();
  gen->add_option("--novel-classes", spec.novel_classes)->capture_default_str();
  gen->add_option("--samples-per-class", spec.samples_per_class)->capture_default_str();
  gen->add_option("--input-dim", spec.input_dim)->capture_default_str();
  gen->add_option("--signal-dim", spec.signal_dim)->capture_default_str();
  gen->add_option("--spread", spec.cluster_spread, "per-class noise scale")->capture_default_str();
  gen->add_option("--separation", spec.inter_class_separation, "radius of the class-mean sphere")
      ->capture_default_str();
  gen->add_option("--nuisance", spec.nuisance_spread, "noise scale of the non-signal coordinates")
      ->capture_default_str();
  gen->add_option("--from-csv", from_csv, "convert base.csv,val.csv,novel.csv instead of generating");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "stage 1: cross-entropy training over all base classes");
  bel::TrainConfig pre_cfg = bel::TrainConfig::pretrain_defaults();
  std::string pre_data, pre_run, unused_loss, unused_rule;
  pre->add_option("--data", pre_data, "dataset directory")->required();
  pre->add_option("--run", pre_run, "run output directory")->required();
  add_train_options(pre, pre_cfg, false, unused_loss, unused_rule);

  // metatrain
  auto* meta = app.add_subcommand("metatrain", "stage 2: episodic training with prior evidence fusion");
  bel::TrainConfig meta_cfg = bel::TrainConfig::metatrain_defaults();
  std::string meta_data, meta_run, meta_pretrained, meta_loss = "bel", meta_rule = "evidence";
  meta->add_option("--data", meta_data, "dataset directory")->required();
  meta->add_option("--pretrained", meta_pretrained, "pre-trained checkpoint")->required();
  meta->add_option("--run", meta_run, "run output directory")->required();
  add_train_options(meta, meta_cfg, true, meta_loss, meta_rule);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a consistent test stream");
  std::string ev_data, ev_model, ev_pretrained, ev_report, ev_split = "novel";
  std::optional<double> ev_inference_eta, ev_sef_eta;
  EpisodeOptions ev_opts;
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--model", ev_model, "checkpoint to evaluate (pre-trained or meta)")->required();
  ev->add_option("--pretrained", ev_pretrained, "pre-trained checkpoint supplying prior evidence");
  ev->add_option("--inference-eta", ev_inference_eta, "override the prior weight used at inference");
  ev->add_option("--sef-eta", ev_sef_eta, "fuse a meta model trained without prior at test time only");
  ev->add_option("--split", ev_split, "base | val | novel")->capture_default_str();
  ev->add_option("--report-dir", ev_report, "report output directory")->required();
  ev_opts.add(ev);

  // ablate
  auto* ab = app.add_subcommand("ablate", "lambda x eta sweep on a shared test stream");
  bel::TrainConfig ab_cfg = bel::TrainConfig::metatrain_defaults();
  std::string ab_data, ab_pretrained, ab_report, ab_lambdas = "0.04,0.06,0.08", ab_etas = "0,0.2,0.4,0.6";
  std::string ab_loss = "bel", ab_rule = "evidence";
  int ab_jobs = 1;
  EpisodeOptions ab_opts;
  ab->add_option("--data", ab_data, "dataset directory")->required();
  ab->add_option("--pretrained", ab_pretrained, "pre-trained checkpoint")->required();
  ab->add_option("--report-dir", ab_report, "output directory")->required();
  ab->add_option("--lambdas", ab_lambdas, "comma-separated lambda values")->capture_default_str();
  ab->add_option("--etas", ab_etas, "comma-separated eta values")->capture_default_str();
  ab->add_option("--jobs", ab_jobs, "grid points trained concurrently")->capture_default_str();
  ab->add_option("--epochs", ab_cfg.epochs)->capture_default_str();
  ab->add_option("--episodes-per-epoch", ab_cfg.episodes_per_epoch)->capture_default_str();
  ab->add_option("--lr", ab_cfg.lr)->capture_default_str();
  ab->add_option("--lr-decay-epochs", ab_cfg.lr_decay_epochs);
  ab->add_option("--train-seed", ab_cfg.seed)->capture_default_str();
  ab->add_option("--val-episodes", ab_cfg.val_episodes)->capture_default_str();
  ab->add_option("--fusion-rule", ab_rule)->capture_default_str();
  ab_opts.add(ab);

  // selftest
  auto* st = app.add_subcommand("selftest", "run the oracle property suites");
  std::string fault;
  st->add_option("--inject-fault", fault, "perturb a special function (digamma) to exercise the suites")
      ->group("");

  // Config files use one [section] per subcommand, e.g. [metatrain] lambda=0.06.
  app.set_config("--config", "", "INI/TOML config file; command-line flags override it");
  for (auto* sub : {gen, pre, meta, ev, ab}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) {
      const fs::path out(gen_out);
      make_dir(out);
      ordered_json cfg;
      if (!from_csv.empty()) {
        const auto files = split_list(from_csv);
        if (files.size() != 3) throw bel::ConfigError("--from-csv needs base,val,novel file names");
        bel::DatasetSplits s{bel::load_feature_csv(files[0], bel::Split::base),
                             bel::load_feature_csv(files[1], bel::Split::val),
                             bel::load_feature_csv(files[2], bel::Split::novel)};
        s.check();
        bel::write_feature_file((out / "base.belf").string(), s.base);
        bel::write_feature_file((out / "val.belf").string(), s.val);
        bel::write_feature_file((out / "novel.belf").string(), s.novel);
        cfg["from_csv"] = files;
      } else {
        try {
          spec.validate();
        } catch (const std::invalid_argument& e) {
          throw bel::ConfigError(e.what());
        }
        const auto s = bel::generate_synthetic(spec);
        bel::write_feature_file((out / "base.belf").string(), s.base);
        bel::write_feature_file((out / "val.belf").string(), s.val);
        bel::write_feature_file((out / "novel.belf").string(), s.novel);
        cfg = {{"base_classes", spec.base_classes},   {"val_classes", spec.val_classes},
               {"novel_classes", spec.novel_classes}, {"samples_per_class", spec.samples_per_class},
               {"input_dim", spec.input_dim},         {"signal_dim", spec.signal_dim},
               {"cluster_spread", spec.cluster_spread}, {"inter_class_separation", spec.inter_class_separation},
               {"nuisance_spread", spec.nuisance_spread}, {"seed", spec.seed}};
      }
      const auto data = load_data_dir(out);
      write_manifest(out, "gen-data", cfg, {{"datasets", data.hashes}});
      std::printf("wrote %s (base %zu, val %zu, novel %zu samples)\n", out.string().c_str(),
                  data.splits.base.num_samples(), data.splits.val.num_samples(), data.splits.novel.num_samples());
      return 0;
    }

    if (*pre) {
      pre_cfg.validate();
      const auto data = load_data_dir(pre_data);
      const fs::path run(pre_run);
      make_dir(run);
      auto res = bel::pretrain(data.splits.base, &data.splits.val, pre_cfg,
                               [](const bel::EpochRecord& r) { print_epoch("pretrain", r); });
      res.record.checkpoint_path = (run / "checkpoint.json").string();
      bel::write_json_file(run / "checkpoint.json", bel::pretrained_to_json(res));
      write_text(run / "epochs.jsonl", res.record.epochs_jsonl());
      write_manifest(run, "pretrain", res.record.config,
                     {{"datasets", data.hashes}, {"best_epoch", res.record.best_epoch},
                      {"parameter_digest", bel::parameter_digest(res.model)}});
      std::printf("checkpoint %s (best epoch %d)\n", res.record.checkpoint_path.c_str(), res.record.best_epoch);
      return 0;
    }

    if (*meta) {
      finish_meta_config(meta_cfg, meta_loss, meta_rule);
      const auto data = load_data_dir(meta_data);
      const auto pretrained = load_pretrained(meta_pretrained);
      const fs::path run(meta_run);
      make_dir(run);
      auto res = bel::metatrain(data.splits.base, &data.splits.val, pretrained, meta_cfg,
                                [](const bel::EpochRecord& r) { print_epoch("metatrain", r); });
      res.record.checkpoint_path = (run / "checkpoint.json").string();
      bel::write_json_file(run / "checkpoint.json", bel::trained_to_json(res.trained));
      write_text(run / "epochs.jsonl", res.record.epochs_jsonl());
      write_manifest(run, "metatrain", res.record.config,
                     {{"datasets", data.hashes},
                      {"pretrained", {{"path", meta_pretrained}, {"sha256", checkpoint_digest(meta_pretrained)}}},
                      {"best_epoch", res.record.best_epoch},
                      {"parameter_digest", bel::parameter_digest(res.trained.model)}});
      std::printf("checkpoint %s (best epoch %d)\n", res.record.checkpoint_path.c_str(), res.record.best_epoch);
      return 0;
    }

    if (*ev) {
      const auto data = load_data_dir(ev_data);
      const bel::Dataset* split = nullptr;
      const auto which = bel::split_from_string(ev_split);
      split = which == bel::Split::base ? &data.splits.base
              : which == bel::Split::val ? &data.splits.val
                                         : &data.splits.novel;
      const auto model_json = bel::read_json_file(ev_model);
      std::optional<bel::MetricModel> pretrained;
      if (!ev_pretrained.empty()) pretrained = load_pretrained(ev_pretrained);

      bel::TrainedModel trained;
      bel::MetricModel baseline;
      bel::Predictor predictor;
      std::string mode;
      if (model_json.value("kind", "") == "pretrained") {
        if (ev_sef_eta || ev_inference_eta) throw bel::ConfigError("--sef-eta/--inference-eta need a meta checkpoint");
        baseline = bel::model_from_json(model_json);
        predictor = bel::classifier_baseline(baseline);
        mode = "classifier_baseline";
      } else {
        trained = bel::trained_from_json(model_json);
        const bel::MetricModel* prior = pretrained ? &*pretrained : nullptr;
        if (ev_sef_eta) {
          if (!prior) throw bel::ConfigError("--sef-eta needs --pretrained");
          predictor = bel::sef_inference_setup(*prior, trained, *ev_sef_eta);
          mode = "sef";
        } else {
          const double eta = ev_inference_eta.value_or(trained.fusion.eta);
          if (trained.loss == bel::LossKind::bel && eta > 0.0 && !prior) {
            throw bel::ConfigError("this model fuses prior evidence (eta > 0); pass --pretrained");
          }
          predictor = bel::meta_predictor(trained, prior, ev_inference_eta);
          mode = std::string("meta_") + bel::to_string(trained.loss);
        }
      }
      if (ev_opts.ece_bins < 1) throw bel::ConfigError("--ece-bins must be >= 1");
      const auto stream = bel::consistent_test_stream(*split, ev_opts.way, ev_opts.shot, ev_opts.query,
                                                      ev_opts.episodes, ev_opts.seed);
      const auto records = bel::evaluate(predictor, *split, stream);
      const auto rep = bel::calibration_report(records, ev_opts.ece_bins);
      ordered_json cfg = ev_opts.to_json();
      cfg["split"] = ev_split;
      cfg["mode"] = mode;
      cfg["eta"] = predictor.fusion.eta;
      ordered_json inputs{{"datasets", data.hashes},
                          {"model", {{"path", ev_model}, {"sha256", checkpoint_digest(ev_model)}}},
                          {"stream_digest", bel::stream_digest(stream)}};
      if (!ev_pretrained.empty()) {
        inputs["pretrained"] = {{"path", ev_pretrained}, {"sha256", checkpoint_digest(ev_pretrained)}};
      }
      bel::emit_report(rep, ev_report, {{"config", cfg}, {"code", version_stamp()}});
      write_manifest(ev_report, "eval", cfg, inputs);
      std::printf("%s: accuracy %.2f%% +- %.2f, ECE %.2f%% (pooled %.2f%%), mean u %.4f\n", mode.c_str(),
                  100.0 * rep.mean_accuracy, 100.0 * rep.ci95, 100.0 * rep.ece, 100.0 * rep.pooled_ece,
                  rep.mean_uncertainty);
      return 0;
    }

    if (*ab) {
      ab_cfg.eta = 0.0;
      finish_meta_config(ab_cfg, ab_loss, ab_rule);
      if (ab_jobs < 1) throw bel::ConfigError("--jobs must be >= 1");
      std::vector<double> lambdas, etas;
      try {
        for (const auto& s : split_list(ab_lambdas)) lambdas.push_back(std::stod(s));
        for (const auto& s : split_list(ab_etas)) etas.push_back(std::stod(s));
      } catch (const std::exception&) {
        throw bel::ConfigError("--lambdas/--etas must be comma-separated numbers");
      }
      if (lambdas.empty() || etas.empty()) throw bel::ConfigError("empty ablation grid");
      const auto data = load_data_dir(ab_data);
      const auto pretrained = load_pretrained(ab_pretrained);
      const auto stream = bel::consistent_test_stream(data.splits.novel, ab_opts.way, ab_opts.shot, ab_opts.query,
                                                      ab_opts.episodes, ab_opts.seed);
      const fs::path out(ab_report);
      make_dir(out);

      std::vector<GridPoint> grid;
      for (double l : lambdas) {
        for (double e : etas) {
          GridPoint g;
          g.lambda = l;
          g.eta = e;
          grid.push_back(g);
        }
      }
      std::atomic<std::size_t> next{0};
      std::mutex print_mutex;
      auto worker = [&] {
        for (std::size_t i = next++; i < grid.size(); i = next++) {
          GridPoint& g = grid[i];
          try {
            bel::TrainConfig c = ab_cfg;
            c.lambda = g.lambda;
            c.eta = g.eta;
            c.validate();
            const auto res = bel::metatrain(data.splits.base, &data.splits.val, pretrained, c);
            const auto records =
                bel::evaluate(bel::meta_predictor(res.trained, &pretrained), data.splits.novel, stream);
            const auto rep = bel::calibration_report(records, ab_opts.ece_bins);
            const fs::path dir = out / ("lambda_" + bel::format_double(g.lambda) + "_eta_" + bel::format_double(g.eta));
            bel::emit_report(rep, dir, {{"lambda", g.lambda}, {"eta", g.eta}, {"code", version_stamp()}});
            g.accuracy = rep.mean_accuracy;
            g.ci95 = rep.ci95;
            g.ece = rep.ece;
            g.stream_digest = bel::stream_digest(stream);
            g.ok = true;
          } catch (const std::exception& e) {
            g.error = e.what();
          }
          std::lock_guard lock(print_mutex);
          std::printf("lambda %-6g eta %-6g %s\n", g.lambda, g.eta,
                      g.ok ? ("accuracy " + bel::format_double(g.accuracy) + " ece " + bel::format_double(g.ece)).c_str()
                           : ("FAILED: " + g.error).c_str());
          std::fflush(stdout);
        }
      };
      std::vector<std::thread> threads;
      for (int t = 0; t < std::min<int>(ab_jobs, static_cast<int>(grid.size())); ++t) threads.emplace_back(worker);
      for (auto& t : threads) t.join();

      std::ostringstream long_csv, acc_csv, ece_csv;
      long_csv << "lambda,eta,status,accuracy,ci95,ece,stream_digest\n";
      acc_csv << "lambda";
      ece_csv << "lambda";
      for (double e : etas) {
        acc_csv << ",eta=" << bel::format_double(e);
        ece_csv << ",eta=" << bel::format_double(e);
      }
      acc_csv << '\n';
      ece_csv << '\n';
      std::size_t failures = 0;
      for (std::size_t li = 0; li < lambdas.size(); ++li) {
        acc_csv << bel::format_double(lambdas[li]);
        ece_csv << bel::format_double(lambdas[li]);
        for (std::size_t ei = 0; ei < etas.size(); ++ei) {
          const auto& g = grid[li * etas.size() + ei];
          long_csv << bel::format_double(g.lambda) << ',' << bel::format_double(g.eta) << ','
                   << (g.ok ? "ok" : "failed") << ',';
          if (g.ok) {
            long_csv << bel::format_double(g.accuracy) << ',' << bel::format_double(g.ci95) << ','
                     << bel::format_double(g.ece) << ',' << g.stream_digest << '\n';
            acc_csv << ',' << bel::format_double(g.accuracy);
            ece_csv << ',' << bel::format_double(g.ece);
          } else {
            ++failures;
            long_csv << ",,,\n";
            acc_csv << ",";
            ece_csv << ",";
          }
        }
        acc_csv << '\n';
        ece_csv << '\n';
      }
      write_text(out / "grid.csv", long_csv.str());
      write_text(out / "accuracy.csv", acc_csv.str());
      write_text(out / "ece.csv", ece_csv.str());
      ordered_json cfg = ab_cfg.to_json();
      cfg["lambdas"] = lambdas;
      cfg["etas"] = etas;
      cfg["test_stream"] = ab_opts.to_json();
      write_manifest(out, "ablate", cfg,
                     {{"datasets", data.hashes},
                      {"pretrained", {{"path", ab_pretrained}, {"sha256", checkpoint_digest(ab_pretrained)}}},
                      {"stream_digest", bel::stream_digest(stream)}});
      std::printf("wrote %s (%zu points, %zu failed)\n", out.string().c_str(), grid.size(), failures);
      return failures == grid.size() ? kExitRuntime : 0;
    }

    if (*st) {
      std::vector<bel::verify::CheckResult> results;
      if (fault.empty()) {
        results = bel::verify::selftest_suite();
      } else if (fault == "digamma") {
        results = bel::verify::selftest_suite<bel::verify::FaultyDigamma>();
      } else {
        throw bel::ConfigError("unknown fault '" + fault + "'");
      }
      bool ok = true;
      for (const auto& r : results) {
        std::printf("%s  %-34s %6.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
        ok = ok && r.passed;
      }
      return ok ? 0 : kExitSelftest;
    }
  } catch (const bel::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
