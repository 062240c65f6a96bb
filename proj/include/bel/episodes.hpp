#pragma once

// Datasets, synthetic Gaussian-cluster generation, the binary feature file
// format and N-way K-shot episode sampling.
//
// Feature file layout (all integers little-endian, version 1):
//
//   offset  size          field
//   0       4             magic "BELF"
//   4       4  u32        format version (1)
//   8       4  u32        split (0 base, 1 val, 2 novel)
//   12      4  u32        input_dim
//   16      4  u32        num_samples
//   20      4  u32        num_classes
//   24      8*C           per class: i32 class id, u32 sample count
//   ...     4*N*D  f32    features, row-major (IEEE-754 binary32)
//   ...     4*N    i32    labels
//
// The file must end exactly after the labels.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bel/model.hpp"
#include "bel/rng.hpp"
#include "bel/sha256.hpp"

namespace bel {

enum class Split : std::uint32_t { base = 0, val = 1, novel = 2 };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::base: return "base";
    case Split::val: return "val";
    case Split::novel: return "novel";
  }
  return "?";
}

inline Split split_from_string(const std::string& s) {
  if (s == "base") return Split::base;
  if (s == "val") return Split::val;
  if (s == "novel") return Split::novel;
  throw std::invalid_argument("unknown split '" + s + "'");
}

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable set of labelled feature vectors belonging to one split.
class Dataset {
 public:
  Dataset(Split split, int input_dim, std::vector<float> features, std::vector<std::int32_t> labels)
      : split_(split), input_dim_(input_dim), features_(std::move(features)), labels_(std::move(labels)) {
    if (input_dim_ <= 0) throw DatasetError("dataset: input_dim must be positive");
    if (features_.size() != labels_.size() * static_cast<std::size_t>(input_dim_)) {
      throw DatasetError("dataset: feature count does not match labels x input_dim");
    }
    for (std::size_t i = 0; i < features_.size(); ++i) {
      if (!std::isfinite(features_[i])) {
        throw DatasetError("dataset: non-finite feature in sample " + std::to_string(i / input_dim_));
      }
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) by_class_[labels_[i]].push_back(i);
    for (const auto& [id, idx] : by_class_) class_ids_.push_back(id);
  }

  Split split() const { return split_; }
  int input_dim() const { return input_dim_; }
  std::size_t num_samples() const { return labels_.size(); }
  std::size_t num_classes() const { return class_ids_.size(); }
  std::span<const float> features() const { return features_; }
  std::span<const std::int32_t> labels() const { return labels_; }
  std::span<const float> feature(std::size_t i) const {
    return std::span(features_).subspan(i * input_dim_, input_dim_);
  }
  std::int32_t label(std::size_t i) const { return labels_[i]; }
  /// Sorted ascending.
  const std::vector<std::int32_t>& class_ids() const { return class_ids_; }
  const std::vector<std::size_t>& indices_of(std::int32_t class_id) const {
    auto it = by_class_.find(class_id);
    if (it == by_class_.end()) throw DatasetError("dataset: unknown class " + std::to_string(class_id));
    return it->second;
  }
  std::size_t min_class_size() const {
    std::size_t m = by_class_.empty() ? 0 : by_class_.begin()->second.size();
    for (const auto& [id, idx] : by_class_) m = std::min(m, idx.size());
    return m;
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.split_ == b.split_ && a.input_dim_ == b.input_dim_ && a.labels_ == b.labels_ &&
           a.features_.size() == b.features_.size() &&
           std::memcmp(a.features_.data(), b.features_.data(), a.features_.size() * sizeof(float)) == 0;
  }

 private:
  Split split_;
  int input_dim_;
  std::vector<float> features_;
  std::vector<std::int32_t> labels_;
  std::map<std::int32_t, std::vector<std::size_t>> by_class_;
  std::vector<std::int32_t> class_ids_;
};

/// Throws if the two datasets share a class id.
inline void check_disjoint(const Dataset& a, const Dataset& b) {
  std::vector<std::int32_t> common;
  std::set_intersection(a.class_ids().begin(), a.class_ids().end(), b.class_ids().begin(),
                        b.class_ids().end(), std::back_inserter(common));
  if (!common.empty()) {
    throw DatasetError(std::string("dataset: ") + to_string(a.split()) + " and " + to_string(b.split()) +
                       " splits share class " + std::to_string(common.front()));
  }
}

struct DatasetSplits {
  Dataset base;
  Dataset val;
  Dataset novel;

  void check() const {
    check_disjoint(base, val);
    check_disjoint(base, novel);
    check_disjoint(val, novel);
  }
};

/// Gaussian clusters. Class means are drawn uniformly on a sphere of radius
/// inter_class_separation inside the first signal_dim coordinates; samples
/// add isotropic noise of scale cluster_spread there. The remaining
/// input_dim - signal_dim coordinates carry class-independent noise of scale
/// nuisance_spread.
struct SyntheticSpec {
  int base_classes = 64;
  int val_classes = 16;
  int novel_classes = 20;
  int samples_per_class = 100;
  int input_dim = 64;
  int signal_dim = 16;
  double cluster_spread = 1.0;
  double inter_class_separation = 3.0;
  double nuisance_spread = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (base_classes < 1 || val_classes < 0 || novel_classes < 1) {
      throw std::invalid_argument("SyntheticSpec: class counts must be positive");
    }
    if (samples_per_class < 1) throw std::invalid_argument("SyntheticSpec: samples_per_class must be >= 1");
    if (input_dim < 1 || signal_dim < 1 || signal_dim > input_dim) {
      throw std::invalid_argument("SyntheticSpec: need 1 <= signal_dim <= input_dim");
    }
    if (!(cluster_spread >= 0.0) || !(inter_class_separation >= 0.0) || !(nuisance_spread >= 0.0)) {
      throw std::invalid_argument("SyntheticSpec: spreads must be >= 0");
    }
  }
};

inline DatasetSplits generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int total = spec.base_classes + spec.val_classes + spec.novel_classes;
  std::vector<std::vector<double>> means(total, std::vector<double>(spec.signal_dim));
  for (auto& m : means) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : m) {
        v = rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (double& v : m) v *= spec.inter_class_separation / norm;
  }

  auto make = [&](Split split, int first, int count) {
    std::vector<float> features;
    std::vector<std::int32_t> labels;
    features.reserve(static_cast<std::size_t>(count) * spec.samples_per_class * spec.input_dim);
    for (int c = first; c < first + count; ++c) {
      for (int s = 0; s < spec.samples_per_class; ++s) {
        for (int d = 0; d < spec.input_dim; ++d) {
          const double v = d < spec.signal_dim ? means[c][d] + spec.cluster_spread * rng.normal()
                                                : spec.nuisance_spread * rng.normal();
          features.push_back(static_cast<float>(v));
        }
        labels.push_back(c);
      }
    }
    return Dataset(split, spec.input_dim, std::move(features), std::move(labels));
  };

  DatasetSplits out{make(Split::base, 0, spec.base_classes),
                    make(Split::val, spec.base_classes, spec.val_classes),
                    make(Split::novel, spec.base_classes + spec.val_classes, spec.novel_classes)};
  out.check();
  return out;
}

// -- binary feature files ---------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  std::uint32_t u32(const char* what) {
    if (pos_ > bytes_.size() || bytes_.size() - pos_ < 4) {
      throw DatasetError("feature file truncated at byte offset " + std::to_string(pos_) +
                         " while reading " + what);
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline constexpr char kMagic[4] = {'B', 'E', 'L', 'F'};
inline constexpr std::uint32_t kFormatVersion = 1;

}  // namespace detail

inline std::string serialize_dataset(const Dataset& d) {
  std::string out(detail::kMagic, 4);
  detail::put_u32(out, detail::kFormatVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(d.split()));
  detail::put_u32(out, static_cast<std::uint32_t>(d.input_dim()));
  detail::put_u32(out, static_cast<std::uint32_t>(d.num_samples()));
  detail::put_u32(out, static_cast<std::uint32_t>(d.num_classes()));
  for (std::int32_t id : d.class_ids()) {
    detail::put_u32(out, static_cast<std::uint32_t>(id));
    detail::put_u32(out, static_cast<std::uint32_t>(d.indices_of(id).size()));
  }
  for (float f : d.features()) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  for (std::int32_t l : d.labels()) detail::put_u32(out, static_cast<std::uint32_t>(l));
  return out;
}

inline Dataset parse_dataset(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), detail::kMagic, 4) != 0) {
    throw DatasetError("feature file: bad magic at byte offset 0");
  }
  detail::ByteReader r(bytes, 4);
  const auto at = [&] { return std::to_string(r.offset()); };
  const std::uint32_t version = r.u32("version");
  if (version != detail::kFormatVersion) {
    throw DatasetError("feature file: unsupported version " + std::to_string(version));
  }
  const std::uint32_t split = r.u32("split");
  if (split > 2) throw DatasetError("feature file: bad split code " + std::to_string(split));
  const std::uint32_t dim = r.u32("input_dim");
  const std::uint32_t n = r.u32("num_samples");
  const std::uint32_t classes = r.u32("num_classes");
  if (dim == 0) throw DatasetError("feature file: input_dim is 0");
  const std::uint64_t needed = 8ull * classes + 4ull * n * dim + 4ull * n;
  if (needed > r.remaining()) {
    throw DatasetError("feature file truncated: header at byte offset " + at() + " declares " +
                       std::to_string(needed) + " more bytes, " + std::to_string(r.remaining()) +
                       " present");
  }
  if (needed < r.remaining()) {
    throw DatasetError("feature file: " + std::to_string(r.remaining() - needed) +
                       " trailing bytes after labels");
  }
  std::map<std::int32_t, std::uint32_t> declared;
  for (std::uint32_t c = 0; c < classes; ++c) {
    const auto id = static_cast<std::int32_t>(r.u32("class id"));
    const std::uint32_t count = r.u32("class count");
    if (!declared.emplace(id, count).second) {
      throw DatasetError("feature file: class " + std::to_string(id) + " listed twice in header");
    }
  }
  std::vector<float> features(static_cast<std::size_t>(n) * dim);
  for (float& f : features) f = std::bit_cast<float>(r.u32("features"));
  std::vector<std::int32_t> labels(n);
  for (auto& l : labels) l = static_cast<std::int32_t>(r.u32("labels"));

  Dataset d(static_cast<Split>(split), static_cast<int>(dim), std::move(features), std::move(labels));
  for (const auto& [id, count] : declared) {
    const bool present = std::binary_search(d.class_ids().begin(), d.class_ids().end(), id);
    const std::size_t actual = present ? d.indices_of(id).size() : 0;
    if (actual != count) {
      throw DatasetError("feature file: class " + std::to_string(id) + " header declares " +
                         std::to_string(count) + " samples, labels contain " + std::to_string(actual));
    }
  }
  for (std::int32_t id : d.class_ids()) {
    if (!declared.contains(id)) {
      throw DatasetError("feature file: class " + std::to_string(id) + " present in labels but not in header");
    }
  }
  return d;
}

inline void write_feature_file(const std::string& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const std::string bytes = serialize_dataset(d);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Dataset load_feature_file(const std::string& path) {
  try {
    return parse_dataset(read_file_bytes(path));
  } catch (const DatasetError& e) {
    throw DatasetError(path + ": " + e.what());
  }
}

/// CSV rows of the form `label,f0,f1,...`. A first line starting with a
/// non-numeric field is treated as a header.
inline Dataset load_feature_csv(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<float> features;
  std::vector<std::int32_t> labels;
  int dim = -1;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    try {
      std::size_t used = 0;
      const long label = std::stol(fields.at(0), &used);
      if (used != fields[0].size()) throw std::invalid_argument("label");
      const int row_dim = static_cast<int>(fields.size()) - 1;
      if (dim < 0) dim = row_dim;
      if (row_dim != dim || dim == 0) {
        throw DatasetError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                           " features, found " + std::to_string(row_dim));
      }
      for (int j = 1; j <= dim; ++j) {
        features.push_back(std::stof(fields[j], &used));
        if (used != fields[j].size()) throw std::invalid_argument("feature");
      }
      labels.push_back(static_cast<std::int32_t>(label));
    } catch (const DatasetError&) {
      throw;
    } catch (const std::exception&) {
      if (line_no == 1 && labels.empty()) continue;  // header
      throw DatasetError(path + ":" + std::to_string(line_no) + ": cannot parse row");
    }
  }
  if (labels.empty()) throw DatasetError(path + ": no rows");
  return Dataset(split, dim, std::move(features), std::move(labels));
}

inline std::string dataset_digest(const Dataset& d) { return sha256_hex(serialize_dataset(d)); }

// -- episodes ---------------------------------------------------------------

/// One N-way K-shot task. Indices refer to rows of the source dataset;
/// labels are remapped to 0..way-1 in the order classes were drawn.
struct Episode {
  int way = 0;
  int shot = 0;
  int query_count = 0;
  std::vector<std::int32_t> class_ids;
  std::vector<std::size_t> support;
  std::vector<int> support_labels;
  std::vector<std::size_t> query;
  std::vector<int> query_labels;

  friend bool operator==(const Episode&, const Episode&) = default;
};

/// Classes are drawn with Rng::choose over the sorted class ids, then for
/// each drawn class (in draw order) shot + query_count samples are drawn
/// with Rng::choose over that class's row indices; the first `shot` become
/// support, the rest query.
inline Episode sample_episode(const Dataset& d, int way, int shot, int query_count, Rng& rng) {
  if (way < 2) throw DatasetError("sample_episode: way must be >= 2");
  if (shot < 1 || query_count < 1) throw DatasetError("sample_episode: shot and query must be >= 1");
  if (d.num_classes() < static_cast<std::size_t>(way)) {
    throw DatasetError(std::string("sample_episode: ") + to_string(d.split()) + " split has " +
                       std::to_string(d.num_classes()) + " classes, need " + std::to_string(way));
  }
  Episode ep;
  ep.way = way;
  ep.shot = shot;
  ep.query_count = query_count;
  ep.class_ids = rng.choose(d.class_ids(), static_cast<std::size_t>(way));
  for (int k = 0; k < way; ++k) {
    const auto& rows = d.indices_of(ep.class_ids[k]);
    if (rows.size() < static_cast<std::size_t>(shot + query_count)) {
      throw DatasetError("sample_episode: class " + std::to_string(ep.class_ids[k]) + " has " +
                         std::to_string(rows.size()) + " samples, need " +
                         std::to_string(shot + query_count));
    }
    const auto picked = rng.choose(rows, static_cast<std::size_t>(shot + query_count));
    for (int i = 0; i < shot; ++i) {
      ep.support.push_back(picked[i]);
      ep.support_labels.push_back(k);
    }
    for (int i = shot; i < shot + query_count; ++i) {
      ep.query.push_back(picked[i]);
      ep.query_labels.push_back(k);
    }
  }
  return ep;
}

/// Fixed-order evaluation episodes: the same (dataset, parameters, seed)
/// always yields the same sequence.
inline std::vector<Episode> consistent_test_stream(const Dataset& d, int way, int shot, int query_count,
                                                   int num_episodes, std::uint64_t seed) {
  if (num_episodes < 0) throw DatasetError("consistent_test_stream: negative episode count");
  Rng rng(seed);
  std::vector<Episode> out;
  out.reserve(num_episodes);
  for (int i = 0; i < num_episodes; ++i) out.push_back(sample_episode(d, way, shot, query_count, rng));
  return out;
}

inline std::string serialize_episodes(std::span<const Episode> episodes) {
  std::string out;
  for (const Episode& ep : episodes) {
    detail::put_u32(out, static_cast<std::uint32_t>(ep.way));
    detail::put_u32(out, static_cast<std::uint32_t>(ep.shot));
    detail::put_u32(out, static_cast<std::uint32_t>(ep.query_count));
    for (auto c : ep.class_ids) detail::put_u32(out, static_cast<std::uint32_t>(c));
    for (auto i : ep.support) detail::put_u32(out, static_cast<std::uint32_t>(i));
    for (auto i : ep.query) detail::put_u32(out, static_cast<std::uint32_t>(i));
  }
  return out;
}

/// SHA-256 over the first `count` episodes of a stream.
inline std::string stream_digest(std::span<const Episode> episodes, std::size_t count = 10) {
  return sha256_hex(serialize_episodes(episodes.first(std::min(count, episodes.size()))));
}

inline Matrix gather_rows(const Dataset& d, std::span<const std::size_t> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), d.input_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto f = d.feature(rows[i]);
    for (int j = 0; j < d.input_dim(); ++j) m(static_cast<Eigen::Index>(i), j) = f[j];
  }
  return m;
}

inline EpisodeBatch materialize(const Dataset& d, const Episode& ep) {
  EpisodeBatch b;
  b.way = ep.way;
  b.support = gather_rows(d, ep.support);
  b.support_labels = ep.support_labels;
  b.query = gather_rows(d, ep.query);
  b.query_labels = ep.query_labels;
  return b;
}

}  // namespace bel
