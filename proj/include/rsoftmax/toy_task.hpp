#pragma once

// Toy sequence classification used to compare attention row mappings.
//
// Each sequence holds seq_len tokens: one class signature token at a random
// position and seq_len - 1 Gaussian distractors. The model is one attention
// block, mean pooling over positions, and a linear classifier; the label is
// the class of the signature token.

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsoftmax/attention.hpp"
#include "rsoftmax/json_util.hpp"
#include "rsoftmax/losses.hpp"
#include "rsoftmax/nn.hpp"

namespace rsoftmax {

struct ToyTaskConfig {
  std::size_t seq_len = 16;
  std::size_t d_model = 16;
  std::size_t d_k = 16;
  std::size_t n_classes = 4;
  std::size_t n_train = 512;
  std::size_t n_test = 256;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-2;
  double signal = 2.0;  // signature token scale relative to distractors
  double target_r = 0.2;
  double warmup_fraction = 0.5;  // share of total steps spent ramping r
  double temperature = 1.0;      // tsoftmax rows only
  std::uint64_t seed = 0;

  friend bool operator==(const ToyTaskConfig&, const ToyTaskConfig&) = default;
};

inline void validate(const ToyTaskConfig& c) {
  if (c.seq_len == 0 || c.d_model == 0 || c.d_k == 0) throw ConfigError("seq_len, d_model and d_k must be positive");
  if (c.n_classes < 2) throw ConfigError("toy task needs at least 2 classes");
  if (c.n_train == 0 || c.n_test == 0) throw ConfigError("n_train and n_test must be positive");
  if (c.epochs == 0 || c.batch_size == 0) throw ConfigError("epochs and batch_size must be positive");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(c.signal > 0.0)) throw ConfigError("signal must be positive");
  if (!(c.target_r >= 0.0 && c.target_r <= 1.0)) throw ConfigError("target_r must lie in [0, 1]");
  if (!(c.warmup_fraction >= 0.0 && c.warmup_fraction <= 1.0)) throw ConfigError("warmup_fraction must lie in [0, 1]");
  if (!(c.temperature > 0.0)) throw ConfigError("temperature must be positive");
}

inline json to_json(const ToyTaskConfig& c) {
  return {{"seq_len", c.seq_len},         {"d_model", c.d_model},
          {"d_k", c.d_k},                 {"n_classes", c.n_classes},
          {"n_train", c.n_train},         {"n_test", c.n_test},
          {"epochs", c.epochs},           {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"signal", c.signal},
          {"target_r", c.target_r},       {"warmup_fraction", c.warmup_fraction},
          {"temperature", c.temperature}, {"seed", c.seed}};
}

inline ToyTaskConfig toy_config_from_json(const json& j) {
  detail::reject_unknown(j,
                         {"seq_len", "d_model", "d_k", "n_classes", "n_train", "n_test", "epochs", "batch_size",
                          "learning_rate", "signal", "target_r", "warmup_fraction", "temperature", "seed"},
                         "attention config");
  ToyTaskConfig c;
  c.seq_len = detail::read_field(j, "seq_len", c.seq_len);
  c.d_model = detail::read_field(j, "d_model", c.d_model);
  c.d_k = detail::read_field(j, "d_k", c.d_k);
  c.n_classes = detail::read_field(j, "n_classes", c.n_classes);
  c.n_train = detail::read_field(j, "n_train", c.n_train);
  c.n_test = detail::read_field(j, "n_test", c.n_test);
  c.epochs = detail::read_field(j, "epochs", c.epochs);
  c.batch_size = detail::read_field(j, "batch_size", c.batch_size);
  c.learning_rate = detail::read_field(j, "learning_rate", c.learning_rate);
  c.signal = detail::read_field(j, "signal", c.signal);
  c.target_r = detail::read_field(j, "target_r", c.target_r);
  c.warmup_fraction = detail::read_field(j, "warmup_fraction", c.warmup_fraction);
  c.temperature = detail::read_field(j, "temperature", c.temperature);
  c.seed = detail::read_field(j, "seed", c.seed);
  validate(c);
  return c;
}

struct ToySample {
  Matrix tokens;  // seq_len x d_model
  std::size_t label = 0;
};

struct ToyData {
  std::vector<ToySample> train;
  std::vector<ToySample> test;
};

inline ToyData make_toy_data(const ToyTaskConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix signatures(cfg.n_classes, cfg.d_model);
  for (double& v : signatures.flat()) v = cfg.signal * normal(rng);

  auto draw = [&](std::size_t count) {
    std::vector<ToySample> out(count);
    std::uniform_int_distribution<std::size_t> cls(0, cfg.n_classes - 1);
    std::uniform_int_distribution<std::size_t> pos(0, cfg.seq_len - 1);
    for (auto& s : out) {
      s.label = cls(rng);
      s.tokens = Matrix(cfg.seq_len, cfg.d_model);
      for (double& v : s.tokens.flat()) v = normal(rng);
      const std::size_t at = pos(rng);
      auto row = s.tokens.row(at);
      for (std::size_t j = 0; j < cfg.d_model; ++j) row[j] = signatures(s.label, j) + 0.1 * normal(rng);
    }
    return out;
  };
  ToyData data;
  data.train = draw(cfg.n_train);
  data.test = draw(cfg.n_test);
  return data;
}

struct ToyModel {
  AttentionBlock block;
  Matrix classifier;  // d_k x n_classes
  std::vector<double> bias;

  std::vector<std::span<double>> parameters() {
    return {block.query.flat(), block.key.flat(), block.value.flat(), classifier.flat(), bias};
  }
};

struct ToyForward {
  AttentionOutput attention;
  std::vector<double> pooled;
  std::vector<double> logits;
};

inline ToyForward toy_forward(const ToyModel& m, const Matrix& tokens, SparsityRate r) {
  ToyForward f;
  f.attention = attend(m.block, tokens, r);
  const auto& y = f.attention.output;
  f.pooled.assign(y.cols(), 0.0);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    for (std::size_t j = 0; j < y.cols(); ++j) f.pooled[j] += y(i, j);
  }
  for (double& v : f.pooled) v /= static_cast<double>(y.rows());
  f.logits = m.bias;
  for (std::size_t j = 0; j < m.classifier.rows(); ++j) {
    for (std::size_t c = 0; c < m.classifier.cols(); ++c) f.logits[c] += f.pooled[j] * m.classifier(j, c);
  }
  return f;
}

struct ToyEpoch {
  std::size_t epoch = 0;
  double rate = 0.0;  // schedule rate at the end of the epoch
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double mean_zeros_per_row = 0.0;
};

struct ToyRunResult {
  std::vector<ToyEpoch> epochs;
  std::vector<double> rate_trace;  // schedule rate at every optimizer step
  double final_accuracy = 0.0;
  double final_rate = 0.0;
  std::size_t min_zeros_per_row = 0;
  std::size_t max_zeros_per_row = 0;
  std::vector<double> final_parameters;  // flattened, for bitwise comparisons
};

struct ToyEvaluation {
  double accuracy = 0.0;
  double mean_zeros = 0.0;
  std::size_t min_zeros = 0;
  std::size_t max_zeros = 0;
};

inline ToyEvaluation evaluate_toy(const ToyModel& m, const std::vector<ToySample>& samples, SparsityRate r) {
  ToyEvaluation e;
  e.min_zeros = SIZE_MAX;
  std::size_t correct = 0, rows = 0, zeros = 0;
  for (const auto& s : samples) {
    const auto f = toy_forward(m, s.tokens, r);
    if (argmax(f.logits) == s.label) ++correct;
    const auto& a = f.attention.attention();
    for (std::size_t i = 0; i < a.rows(); ++i) {
      std::size_t z = 0;
      for (double p : a.row(i)) z += (p == 0.0);
      zeros += z;
      ++rows;
      e.min_zeros = std::min(e.min_zeros, z);
      e.max_zeros = std::max(e.max_zeros, z);
    }
  }
  e.accuracy = samples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples.size());
  e.mean_zeros = rows == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(rows);
  if (rows == 0) e.min_zeros = 0;
  return e;
}

// Trains the toy model with the given row mapping. For RSoftmax the rate
// follows a linear ramp from 0 to target_r over the first warmup_fraction of
// optimizer steps.
inline ToyRunResult run_toy(const ToyTaskConfig& cfg, const MappingKind& kind) {
  const ToyData data = make_toy_data(cfg);
  std::mt19937_64 rng(cfg.seed);
  ToyModel model;
  model.block = AttentionBlock(cfg.d_model, cfg.d_k, kind);
  model.block.init(rng);
  model.classifier = Matrix(cfg.d_k, cfg.n_classes);
  glorot_uniform(model.classifier, cfg.d_k, cfg.n_classes, rng);
  model.bias.assign(cfg.n_classes, 0.0);

  const std::size_t batches = (cfg.n_train + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches * cfg.epochs;
  SparsitySchedule schedule;
  schedule.target_r = kind.tag() == Mapping::RSoftmax ? cfg.target_r : 0.0;
  schedule.warmup_steps = static_cast<std::size_t>(std::llround(cfg.warmup_fraction * static_cast<double>(total_steps)));

  AdamState adam;
  adam.config.learning_rate = cfg.learning_rate;
  ToyRunResult result;
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const SparsityRate r = schedule.rate(step);
      result.rate_trace.push_back(r.value());
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      const double inv = 1.0 / static_cast<double>(end - begin);

      ParamGrads grads;
      for (auto p : model.parameters()) grads.emplace_back(p.size(), 0.0);
      for (std::size_t s = begin; s < end; ++s) {
        const auto& sample = data.train[order[s]];
        const auto f = toy_forward(model, sample.tokens, r);
        Vector target(cfg.n_classes, 0.0);
        target[sample.label] = 1.0;
        const auto ce = cross_entropy(f.logits, target);
        loss_sum += ce.value;

        const std::size_t len = sample.tokens.rows();
        std::vector<double> grad_pooled(cfg.d_k, 0.0);
        for (std::size_t j = 0; j < cfg.d_k; ++j) {
          for (std::size_t c = 0; c < cfg.n_classes; ++c) {
            grads[3][j * cfg.n_classes + c] += inv * f.pooled[j] * ce.grad[c];
            grad_pooled[j] += model.classifier(j, c) * ce.grad[c];
          }
        }
        for (std::size_t c = 0; c < cfg.n_classes; ++c) grads[4][c] += inv * ce.grad[c];
        Matrix grad_out(len, cfg.d_k);
        for (std::size_t i = 0; i < len; ++i) {
          for (std::size_t j = 0; j < cfg.d_k; ++j) grad_out(i, j) = grad_pooled[j] / static_cast<double>(len);
        }
        const auto g = backward_attend(model.block, f.attention.cache, grad_out);
        for (std::size_t i = 0; i < g.query.size(); ++i) {
          grads[0][i] += inv * g.query.flat()[i];
          grads[1][i] += inv * g.key.flat()[i];
          grads[2][i] += inv * g.value.flat()[i];
        }
      }
      auto params = model.parameters();
      adam_step(adam, params, grads);
      ++step;
    }
    const SparsityRate r_now = schedule.rate(step);
    const auto eval = evaluate_toy(model, data.test, r_now);
    result.epochs.push_back({epoch, r_now.value(), loss_sum / static_cast<double>(data.train.size()),
                             eval.accuracy, eval.mean_zeros});
  }

  const SparsityRate r_final = schedule.rate(step);
  const auto eval = evaluate_toy(model, data.test, r_final);
  result.final_accuracy = eval.accuracy;
  result.final_rate = r_final.value();
  result.min_zeros_per_row = eval.min_zeros;
  result.max_zeros_per_row = eval.max_zeros;
  for (auto p : model.parameters()) result.final_parameters.insert(result.final_parameters.end(), p.begin(), p.end());
  return result;
}

// The mapping a toy run uses for a name accepted by the attn command.
inline MappingKind toy_mapping(std::string_view name, const ToyTaskConfig& cfg,
                               RGradMode mode = RGradMode::Full) {
  if (name == "softmax") return MappingKind::softmax();
  if (name == "sparsemax") return MappingKind::sparsemax();
  if (name == "tsoftmax") return MappingKind::t_softmax(Temperature(cfg.temperature));
  if (name == "rsoftmax") return MappingKind::r_softmax(SparsityRate(0.0), mode);
  throw ConfigError("unknown attention mapping '" + std::string(name) + "'");
}

// FNV-1a 64 over the bit patterns of the parameters, as 16 hex digits.
inline std::string parameter_digest(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xfu];
  return out;
}

inline json to_json(const ToyRunResult& r, std::string_view mapping, const ToyTaskConfig& cfg) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"rate", e.rate},
                      {"train_loss", e.train_loss},
                      {"test_accuracy", e.test_accuracy},
                      {"mean_zeros_per_row", e.mean_zeros_per_row}});
  }
  json j;
  j["mapping"] = std::string(mapping);
  j["final_accuracy"] = r.final_accuracy;
  j["final_rate"] = r.final_rate;
  j["zeros_per_row"] = {{"min", r.min_zeros_per_row}, {"max", r.max_zeros_per_row}};
  if (mapping == "rsoftmax") {
    j["expected_zeros_per_row"] = static_cast<std::size_t>(
        std::floor(cfg.target_r * static_cast<double>(cfg.seq_len) + 1e-9));
  }
  j["epochs"] = std::move(epochs);
  j["rate_trace"] = r.rate_trace;
  j["parameter_digest"] = parameter_digest(r.final_parameters);
  return j;
}

}  // namespace rsoftmax
