#pragma once

// Synthetic multi-label corpus: each sample draws a label count from a
// truncated Poisson, that many distinct classes, a Poisson document length,
// and word counts from the uniform mixture of the chosen classes' word
// distributions.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rsoftmax/error.hpp"

namespace rsoftmax {

struct SynthConfig {
  std::size_t n_samples = 5000;
  std::size_t n_features = 128;
  std::size_t n_classes = 10;
  double mean_labels = 5.0;        // Poisson mean of the positive-label count
  double mean_doc_length = 2000.0; // Poisson mean of the per-sample word total
  // Upper bound of the accepted label count; 0 means n_classes. Setting it to
  // 1 turns the corpus into a single-label one.
  std::size_t max_labels = 0;
  std::uint64_t seed = 0;

  std::size_t label_cap() const noexcept { return max_labels == 0 ? n_classes : max_labels; }

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

inline void validate(const SynthConfig& c) {
  if (c.n_samples < 2) throw ConfigError("n_samples must be at least 2");
  if (c.n_features < 1) throw ConfigError("n_features must be positive");
  if (c.n_classes < 1) throw ConfigError("n_classes must be positive");
  if (!(c.mean_labels > 0.0)) throw ConfigError("mean_labels must be positive");
  if (c.mean_labels > static_cast<double>(c.n_classes)) {
    throw ConfigError("mean_labels (" + std::to_string(c.mean_labels) + ") exceeds n_classes (" +
                      std::to_string(c.n_classes) + ")");
  }
  if (!(c.mean_doc_length > 0.0)) throw ConfigError("mean_doc_length must be positive");
  if (c.max_labels > c.n_classes) throw ConfigError("max_labels exceeds n_classes");
  if (c.n_samples > UINT32_MAX || c.n_features > UINT32_MAX || c.n_classes > UINT32_MAX) {
    throw ConfigError("dimensions must fit in 32 bits");
  }
}

struct MultiLabelDataset {
  SynthConfig config;
  std::vector<std::uint32_t> counts;  // n_samples x n_features, row-major
  std::vector<std::uint8_t> labels;   // n_samples x n_classes, 0/1
  std::vector<std::uint8_t> is_train; // n_samples, 0/1

  std::size_t n_samples() const noexcept { return config.n_samples; }
  std::size_t n_features() const noexcept { return config.n_features; }
  std::size_t n_classes() const noexcept { return config.n_classes; }

  std::span<const std::uint32_t> count_row(std::size_t i) const {
    return {counts.data() + i * n_features(), n_features()};
  }
  std::span<const std::uint8_t> label_row(std::size_t i) const {
    return {labels.data() + i * n_classes(), n_classes()};
  }

  std::uint64_t doc_length(std::size_t i) const {
    auto row = count_row(i);
    return std::accumulate(row.begin(), row.end(), std::uint64_t{0});
  }

  // Term frequencies scaled by n_features, so a uniform document maps to ones.
  std::vector<double> features(std::size_t i) const {
    auto row = count_row(i);
    const double scale = static_cast<double>(n_features()) / static_cast<double>(doc_length(i));
    std::vector<double> out(row.size());
    for (std::size_t f = 0; f < row.size(); ++f) out[f] = static_cast<double>(row[f]) * scale;
    return out;
  }

  std::vector<std::size_t> split_indices(bool train) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_samples(); ++i) {
      if (static_cast<bool>(is_train[i]) == train) out.push_back(i);
    }
    return out;
  }
  std::vector<std::size_t> train_indices() const { return split_indices(true); }
  std::vector<std::size_t> validation_indices() const { return split_indices(false); }

  friend bool operator==(const MultiLabelDataset&, const MultiLabelDataset&) = default;
};

inline std::size_t train_size(std::size_t n_samples) { return n_samples * 4 / 5; }

inline MultiLabelDataset generate(const SynthConfig& config) {
  validate(config);
  const std::size_t n = config.n_samples;
  const std::size_t f = config.n_features;
  const std::size_t c = config.n_classes;
  std::mt19937_64 rng(config.seed);

  // Dirichlet(1) word distribution per class.
  std::vector<double> word_dist(c * f);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  for (std::size_t k = 0; k < c; ++k) {
    double total = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      word_dist[k * f + j] = gamma(rng);
      total += word_dist[k * f + j];
    }
    for (std::size_t j = 0; j < f; ++j) word_dist[k * f + j] /= total;
  }

  MultiLabelDataset ds;
  ds.config = config;
  ds.counts.assign(n * f, 0);
  ds.labels.assign(n * c, 0);
  ds.is_train.assign(n, 0);

  constexpr int kMaxRejections = 100000;
  std::poisson_distribution<std::uint64_t> label_count(config.mean_labels);
  std::poisson_distribution<std::uint64_t> doc_length(config.mean_doc_length);
  std::vector<std::size_t> classes(c);
  std::vector<double> mixture(f);

  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t k = 0;
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxRejections) throw ConfigError("label-count rejection sampling did not terminate");
      k = label_count(rng);
      if (k >= 1 && k <= config.label_cap()) break;
    }
    // Partial Fisher-Yates: the first k entries are the chosen classes.
    std::iota(classes.begin(), classes.end(), std::size_t{0});
    for (std::size_t j = 0; j < k; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, c - 1);
      std::swap(classes[j], classes[pick(rng)]);
    }
    std::fill(mixture.begin(), mixture.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      ds.labels[i * c + classes[j]] = 1;
      for (std::size_t w = 0; w < f; ++w) mixture[w] += word_dist[classes[j] * f + w];
    }

    std::uint64_t length = 0;
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxRejections) throw ConfigError("document-length rejection sampling did not terminate");
      length = doc_length(rng);
      if (length >= 1) break;
    }
    std::discrete_distribution<std::size_t> word(mixture.begin(), mixture.end());
    for (std::uint64_t w = 0; w < length; ++w) ++ds.counts[i * f + word(rng)];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t j = 0; j < train_size(n); ++j) ds.is_train[order[j]] = 1;
  return ds;
}

// Binary dataset file, all integers little-endian:
//
//   offset  size  field
//   0       8     magic "RSMXDATA"
//   8       4     u32 format version (1)
//   12      4     u32 n_samples
//   16      4     u32 n_features
//   20      4     u32 n_classes
//   24      4     u32 n_train
//   28      8     u64 seed
//   36      8     f64 mean_labels (IEEE-754 bits)
//   44      8     f64 mean_doc_length
//   52      4     u32 max_labels (0 = n_classes)
//   56      ...   u32 counts, n_samples * n_features, row-major
//           ...   labels, per sample ceil(n_classes / 8) bytes, class c at
//                 bit (c % 8) of byte (c / 8), least significant bit first
//           ...   train mask, ceil(n_samples / 8) bytes, same bit order
//
// The file ends exactly after the train mask.
namespace dataset_format {

inline constexpr char kMagic[8] = {'R', 'S', 'M', 'X', 'D', 'A', 'T', 'A'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 56;

inline std::size_t packed_bytes(std::size_t bits) { return (bits + 7) / 8; }

inline std::size_t file_size(std::size_t n, std::size_t f, std::size_t c) {
  return kHeaderSize + 4 * n * f + n * packed_bytes(c) + packed_bytes(n);
}

}  // namespace dataset_format

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return v;
}
inline std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const MultiLabelDataset& ds) {
  namespace fmt = dataset_format;
  const std::size_t n = ds.n_samples(), f = ds.n_features(), c = ds.n_classes();
  std::vector<std::uint8_t> out;
  out.reserve(fmt::file_size(n, f, c));
  for (char ch : fmt::kMagic) out.push_back(static_cast<std::uint8_t>(ch));
  detail::put_u32(out, fmt::kVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(n));
  detail::put_u32(out, static_cast<std::uint32_t>(f));
  detail::put_u32(out, static_cast<std::uint32_t>(c));
  std::uint32_t n_train = 0;
  for (auto t : ds.is_train) n_train += t;
  detail::put_u32(out, n_train);
  detail::put_u64(out, ds.config.seed);
  detail::put_u64(out, std::bit_cast<std::uint64_t>(ds.config.mean_labels));
  detail::put_u64(out, std::bit_cast<std::uint64_t>(ds.config.mean_doc_length));
  detail::put_u32(out, static_cast<std::uint32_t>(ds.config.max_labels));
  for (auto v : ds.counts) detail::put_u32(out, v);
  const std::size_t label_bytes = fmt::packed_bytes(c);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint8_t> packed(label_bytes, 0);
    for (std::size_t k = 0; k < c; ++k) {
      if (ds.labels[i * c + k]) packed[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
    }
    out.insert(out.end(), packed.begin(), packed.end());
  }
  std::vector<std::uint8_t> mask(fmt::packed_bytes(n), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (ds.is_train[i]) mask[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  out.insert(out.end(), mask.begin(), mask.end());
  return out;
}

inline MultiLabelDataset deserialize(std::span<const std::uint8_t> bytes) {
  namespace fmt = dataset_format;
  if (bytes.size() < fmt::kHeaderSize) throw CorruptFileError("dataset file shorter than its header");
  if (std::memcmp(bytes.data(), fmt::kMagic, sizeof fmt::kMagic) != 0) {
    throw CorruptFileError("dataset file has a bad magic number");
  }
  const std::uint8_t* p = bytes.data();
  const std::uint32_t version = detail::get_u32(p + 8);
  if (version != fmt::kVersion) {
    throw CorruptFileError("unsupported dataset format version " + std::to_string(version));
  }
  MultiLabelDataset ds;
  ds.config.n_samples = detail::get_u32(p + 12);
  ds.config.n_features = detail::get_u32(p + 16);
  ds.config.n_classes = detail::get_u32(p + 20);
  const std::uint32_t n_train = detail::get_u32(p + 24);
  ds.config.seed = detail::get_u64(p + 28);
  ds.config.mean_labels = std::bit_cast<double>(detail::get_u64(p + 36));
  ds.config.mean_doc_length = std::bit_cast<double>(detail::get_u64(p + 44));
  ds.config.max_labels = detail::get_u32(p + 52);
  const std::size_t n = ds.n_samples(), f = ds.n_features(), c = ds.n_classes();
  if (bytes.size() != fmt::file_size(n, f, c)) {
    throw CorruptFileError("dataset file size " + std::to_string(bytes.size()) + " does not match header (expected " +
                           std::to_string(fmt::file_size(n, f, c)) + ")");
  }
  const std::uint8_t* cursor = p + fmt::kHeaderSize;
  ds.counts.resize(n * f);
  for (auto& v : ds.counts) {
    v = detail::get_u32(cursor);
    cursor += 4;
  }
  const std::size_t label_bytes = fmt::packed_bytes(c);
  ds.labels.assign(n * c, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) ds.labels[i * c + k] = (cursor[k / 8] >> (k % 8)) & 1u;
    cursor += label_bytes;
  }
  ds.is_train.assign(n, 0);
  std::uint32_t seen_train = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.is_train[i] = (cursor[i / 8] >> (i % 8)) & 1u;
    seen_train += ds.is_train[i];
  }
  if (seen_train != n_train) throw CorruptFileError("train mask disagrees with header train count");
  return ds;
}

inline void save_dataset(const MultiLabelDataset& ds, const std::string& path) {
  const auto bytes = serialize(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

inline MultiLabelDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace rsoftmax
