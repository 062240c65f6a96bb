#pragma once

// Accuracy with 95% confidence intervals, expected calibration error and
// report files.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace bel {

struct PredictionRecord {
  int episode = 0;
  int predicted = 0;
  int truth = 0;
  /// max_k of the model's class probabilities
  double confidence = 0.0;
  /// K / S for the Dirichlet view of the prediction
  double uncertainty = 1.0;

  bool correct() const { return predicted == truth; }
};

struct CalibrationBin {
  std::size_t count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;
};

/// Index of the bin (i/M, (i+1)/M] holding `confidence`; confidence 0 goes
/// to bin 0.
inline int ece_bin(double confidence, int bins) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw std::invalid_argument("ece_bin: confidence outside [0, 1]");
  }
  int i = static_cast<int>(std::ceil(confidence * bins)) - 1;
  i = std::clamp(i, 0, bins - 1);
  while (i > 0 && confidence <= static_cast<double>(i) / bins) --i;
  while (i < bins - 1 && confidence > static_cast<double>(i + 1) / bins) ++i;
  return i;
}

inline std::vector<CalibrationBin> calibration_bins(std::span<const PredictionRecord> records, int bins) {
  if (bins < 1) throw std::invalid_argument("ece: need at least one bin");
  std::vector<CalibrationBin> out(bins);
  for (const auto& r : records) {
    auto& b = out[ece_bin(r.confidence, bins)];
    ++b.count;
    b.accuracy += r.correct() ? 1.0 : 0.0;
    b.confidence += r.confidence;
  }
  for (auto& b : out) {
    if (b.count) {
      b.accuracy /= static_cast<double>(b.count);
      b.confidence /= static_cast<double>(b.count);
    }
  }
  return out;
}

/// sum_i |G_i| / |D| * |acc(G_i) - conf(G_i)| over M equal-width bins.
inline double ece(std::span<const PredictionRecord> records, int bins) {
  if (records.empty()) throw std::invalid_argument("ece: empty record set");
  const auto groups = calibration_bins(records, bins);
  double out = 0.0;
  for (const auto& g : groups) {
    if (g.count) out += static_cast<double>(g.count) * std::abs(g.accuracy - g.confidence);
  }
  return out / static_cast<double>(records.size());
}

struct AccuracySummary {
  double mean = 0.0;
  /// 1.96 * population standard deviation / sqrt(episodes)
  double ci95 = 0.0;
};

namespace detail {

inline std::map<int, std::vector<PredictionRecord>> by_episode(std::span<const PredictionRecord> records) {
  std::map<int, std::vector<PredictionRecord>> out;
  for (const auto& r : records) out[r.episode].push_back(r);
  return out;
}

inline AccuracySummary mean_ci(std::span<const double> values) {
  AccuracySummary s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  var /= n;
  s.ci95 = 1.96 * std::sqrt(var) / std::sqrt(n);
  return s;
}

}  // namespace detail

inline std::vector<double> per_episode_accuracy(std::span<const PredictionRecord> records) {
  std::vector<double> out;
  for (const auto& [ep, rs] : detail::by_episode(records)) {
    const auto hits = std::count_if(rs.begin(), rs.end(), [](const auto& r) { return r.correct(); });
    out.push_back(static_cast<double>(hits) / static_cast<double>(rs.size()));
  }
  return out;
}

inline std::vector<double> per_episode_ece(std::span<const PredictionRecord> records, int bins) {
  std::vector<double> out;
  for (const auto& [ep, rs] : detail::by_episode(records)) out.push_back(ece(rs, bins));
  return out;
}

/// Mean of per-episode accuracies in [0, 1] with its 95% interval.
inline AccuracySummary episode_accuracy(std::span<const PredictionRecord> records) {
  const auto acc = per_episode_accuracy(records);
  if (acc.size() < 2) throw std::invalid_argument("episode_accuracy: need at least 2 episodes");
  return detail::mean_ci(acc);
}

/// Per-episode ECE averaged over episodes.
inline double average_ece_over_episodes(std::span<const PredictionRecord> records, int bins) {
  if (records.empty()) throw std::invalid_argument("average_ece_over_episodes: empty record set");
  const auto e = per_episode_ece(records, bins);
  return std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
}

struct RankTestResult {
  double u_statistic = 0.0;
  double z = 0.0;
  /// One-sided p-value for "first sample tends to be larger".
  double p_value = 1.0;
};

/// Mann-Whitney U test with tie-corrected normal approximation.
inline RankTestResult rank_sum_test(std::span<const double> larger, std::span<const double> smaller) {
  const std::size_t n1 = larger.size();
  const std::size_t n2 = smaller.size();
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("rank_sum_test: empty sample");
  std::vector<std::pair<double, int>> all;
  all.reserve(n1 + n2);
  for (double v : larger) all.emplace_back(v, 0);
  for (double v : smaller) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end());
  const double n = static_cast<double>(n1 + n2);
  double rank_sum = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second == 0) rank_sum += avg_rank;
    }
    i = j;
  }
  RankTestResult res;
  const double a = static_cast<double>(n1);
  const double b = static_cast<double>(n2);
  res.u_statistic = rank_sum - a * (a + 1.0) / 2.0;
  const double mean = a * b / 2.0;
  const double var = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  res.z = var > 0.0 ? (res.u_statistic - mean) / std::sqrt(var) : 0.0;
  res.p_value = 0.5 * std::erfc(res.z / std::sqrt(2.0));
  return res;
}

struct CalibrationReport {
  int num_bins = 15;
  std::vector<CalibrationBin> bins;  // pooled over all queries
  double ece = 0.0;                  // averaged per episode
  double pooled_ece = 0.0;
  double mean_accuracy = 0.0;
  double ci95 = 0.0;
  double mean_uncertainty = 0.0;
  double mean_uncertainty_correct = 0.0;
  double mean_uncertainty_wrong = 0.0;
  std::size_t num_queries = 0;
  std::vector<double> episode_accuracy;
  std::vector<double> episode_ece;
  std::vector<double> episode_uncertainty;
};

inline CalibrationReport calibration_report(std::span<const PredictionRecord> records, int bins) {
  CalibrationReport rep;
  rep.num_bins = bins;
  rep.bins = calibration_bins(records, bins);
  rep.pooled_ece = ece(records, bins);
  rep.episode_accuracy = per_episode_accuracy(records);
  rep.episode_ece = per_episode_ece(records, bins);
  rep.ece = std::accumulate(rep.episode_ece.begin(), rep.episode_ece.end(), 0.0) /
            static_cast<double>(rep.episode_ece.size());
  const auto acc = detail::mean_ci(rep.episode_accuracy);
  rep.mean_accuracy = acc.mean;
  rep.ci95 = rep.episode_accuracy.size() > 1 ? acc.ci95 : 0.0;
  rep.num_queries = records.size();
  double u_ok = 0.0, u_bad = 0.0, u_all = 0.0;
  std::size_t n_ok = 0, n_bad = 0;
  for (const auto& r : records) {
    u_all += r.uncertainty;
    if (r.correct()) {
      u_ok += r.uncertainty;
      ++n_ok;
    } else {
      u_bad += r.uncertainty;
      ++n_bad;
    }
  }
  rep.mean_uncertainty = u_all / static_cast<double>(records.size());
  rep.mean_uncertainty_correct = n_ok ? u_ok / static_cast<double>(n_ok) : 0.0;
  rep.mean_uncertainty_wrong = n_bad ? u_bad / static_cast<double>(n_bad) : 0.0;
  for (const auto& [ep, rs] : detail::by_episode(records)) {
    double u = 0.0;
    for (const auto& r : rs) u += r.uncertainty;
    rep.episode_uncertainty.push_back(u / static_cast<double>(rs.size()));
  }
  return rep;
}

/// Shortest decimal that round-trips the double; keeps reports byte-stable.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline nlohmann::ordered_json report_summary_json(const CalibrationReport& rep) {
  nlohmann::ordered_json j;
  j["num_episodes"] = rep.episode_accuracy.size();
  j["num_queries"] = rep.num_queries;
  j["mean_accuracy"] = rep.mean_accuracy;
  j["ci95"] = rep.ci95;
  j["ece"] = rep.ece;
  j["pooled_ece"] = rep.pooled_ece;
  j["ece_bins"] = rep.num_bins;
  j["mean_uncertainty"] = rep.mean_uncertainty;
  j["mean_uncertainty_correct"] = rep.mean_uncertainty_correct;
  j["mean_uncertainty_wrong"] = rep.mean_uncertainty_wrong;
  return j;
}

/// Writes report.csv (one row per episode), bins.csv (pooled reliability
/// table) and report.json (summary plus `extra`, e.g. config and version).
inline void emit_report(const CalibrationReport& rep, const std::filesystem::path& dir,
                        const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create report directory " + dir.string() + ": " + ec.message());

  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
  };

  {
    auto out = open(dir / "report.csv");
    out << "episode,accuracy,ece,mean_uncertainty\n";
    for (std::size_t i = 0; i < rep.episode_accuracy.size(); ++i) {
      out << i << ',' << format_double(rep.episode_accuracy[i]) << ',' << format_double(rep.episode_ece[i])
          << ',' << format_double(rep.episode_uncertainty[i]) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + (dir / "report.csv").string());
  }
  {
    auto out = open(dir / "bins.csv");
    out << "bin,lower,upper,count,accuracy,confidence\n";
    for (std::size_t i = 0; i < rep.bins.size(); ++i) {
      out << i << ',' << format_double(static_cast<double>(i) / rep.num_bins) << ','
          << format_double(static_cast<double>(i + 1) / rep.num_bins) << ',' << rep.bins[i].count << ','
          << format_double(rep.bins[i].accuracy) << ',' << format_double(rep.bins[i].confidence) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + (dir / "bins.csv").string());
  }
  {
    auto out = open(dir / "report.json");
    nlohmann::ordered_json j = report_summary_json(rep);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + (dir / "report.json").string());
  }
}

}  // namespace bel
