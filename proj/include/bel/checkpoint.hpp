#pragma once

// JSON checkpoints. Layout:
//   {"format_version": 1, "kind": "pretrained" | "meta",
//    "net": {"dims": [...], "activate_output": bool, "parameters": [...]},
//    "head": {"metric": "cosine" | "euclidean", "temperature": t},
//    "training": {"loss": ..., "eta": ..., "fusion_rule": ..., "lambda": ...},   (meta)
//    "classifier": {"dims": [...], "parameters": [...], "class_ids": [...]}}       (pretrained)
// Parameters are stored flat in the network's own layer order; doubles are
// written with round-trip precision.

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bel/model.hpp"
#include "bel/train.hpp"

namespace bel {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::ordered_json net_to_json(const EmbeddingNet& net) {
  nlohmann::ordered_json j;
  j["dims"] = net.dims();
  j["activate_output"] = net.activate_output();
  const auto p = net.parameters();
  j["parameters"] = std::vector<double>(p.begin(), p.end());
  return j;
}

inline EmbeddingNet net_from_json(const nlohmann::json& j) {
  EmbeddingNet net(j.at("dims").get<std::vector<int>>(), j.value("activate_output", false));
  const auto params = j.at("parameters").get<std::vector<double>>();
  if (params.size() != net.num_parameters()) {
    throw CheckpointError("checkpoint: parameter count " + std::to_string(params.size()) +
                          " does not match shape (" + std::to_string(net.num_parameters()) + ")");
  }
  std::copy(params.begin(), params.end(), net.parameters().begin());
  return net;
}

inline nlohmann::ordered_json model_to_json(const MetricModel& m) {
  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointVersion;
  j["net"] = net_to_json(m.net);
  j["head"] = {{"metric", to_string(m.head.metric)}, {"temperature", m.head.temperature}};
  return j;
}

inline MetricModel model_from_json(const nlohmann::json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported format_version " + std::to_string(version));
  }
  MetricModel m;
  m.net = net_from_json(j.at("net"));
  m.head.metric = metric_from_string(j.at("head").at("metric").get<std::string>());
  m.head.temperature = j.at("head").at("temperature").get<double>();
  m.head.validate();
  return m;
}

inline nlohmann::ordered_json pretrained_to_json(const PretrainResult& r) {
  auto j = model_to_json(r.model);
  j["kind"] = "pretrained";
  auto cls = net_to_json(r.classifier);
  cls["class_ids"] = r.class_ids;
  j["classifier"] = std::move(cls);
  return j;
}

inline nlohmann::ordered_json trained_to_json(const TrainedModel& t) {
  auto j = model_to_json(t.model);
  j["kind"] = "meta";
  j["training"] = {{"loss", to_string(t.loss)},
                   {"eta", t.fusion.eta},
                   {"fusion_rule", to_string(t.fusion.rule)},
                   {"lambda", t.lambda}};
  return j;
}

inline TrainedModel trained_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "meta") throw CheckpointError("checkpoint: not a meta-trained model");
  TrainedModel t;
  t.model = model_from_json(j);
  const auto& tr = j.at("training");
  t.loss = loss_kind_from_string(tr.at("loss").get<std::string>());
  t.fusion.eta = tr.at("eta").get<double>();
  t.fusion.rule = fusion_rule_from_string(tr.at("fusion_rule").get<std::string>());
  t.lambda = tr.at("lambda").get<double>();
  return t;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace bel
