#pragma once

// Two-layer multi-label classifier with optional count head, its reverse-mode
// gradients, and the Adam optimizer.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsoftmax/error.hpp"
#include "rsoftmax/linalg.hpp"
#include "rsoftmax/losses.hpp"
#include "rsoftmax/probmap.hpp"

namespace rsoftmax {

// Output mapping plus the loss it is trained with.
enum class Method {
  Softmax,         // cross-entropy, thresholded at p0 for prediction
  SparsemaxHuber,  // original sparsemax loss
  SparsemaxHinge,  // masked-square + pairwise hinge with sparsemax
  RSoftmax,        // masked-square + pairwise hinge, rate from a count head
  TSoftmax,        // masked-square + pairwise hinge, one learned temperature
};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Softmax: return "softmax";
    case Method::SparsemaxHuber: return "sparsemax_huber";
    case Method::SparsemaxHinge: return "sparsemax_hinge";
    case Method::RSoftmax: return "rsoftmax";
    case Method::TSoftmax: return "tsoftmax";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::Softmax, Method::SparsemaxHuber, Method::SparsemaxHinge,
                   Method::RSoftmax, Method::TSoftmax}) {
    if (to_string(m) == s) return m;
  }
  if (s == "sparsehourglass") {
    throw ConfigError("sparsehourglass is a reserved mapping slot with no implementation");
  }
  throw ConfigError("unknown mapping '" + std::string(s) + "'");
}

struct ModelSpec {
  std::size_t input_dim = 128;
  std::size_t hidden_dim = 64;
  std::size_t n_classes = 10;
  Method method = Method::RSoftmax;
  RGradMode rate_grad = RGradMode::Full;
  double count_weight = 1.0;          // weight of the count-head cross-entropy
  double initial_temperature = 1.0;   // TSoftmax only
};

struct ForwardCache {
  std::vector<double> input;
  std::vector<double> hidden1;  // post-ReLU
  std::vector<double> hidden2;  // post-ReLU
  std::vector<double> logits;
  std::vector<double> count_logits;  // empty without a count head
  std::uint64_t version = 0;
};

// One gradient blob per parameter blob, in parameters() order.
using ParamGrads = std::vector<std::vector<double>>;

class MultiLabelModel {
 public:
  MultiLabelModel(const ModelSpec& spec, std::uint64_t seed)
      : spec_(spec),
        layer1_(spec.input_dim, spec.hidden_dim),
        layer2_(spec.hidden_dim, spec.hidden_dim),
        class_head_(spec.hidden_dim, spec.n_classes) {
    if (spec.input_dim == 0 || spec.hidden_dim == 0 || spec.n_classes < 2) {
      throw ConfigError("model needs input_dim >= 1, hidden_dim >= 1, n_classes >= 2");
    }
    std::mt19937_64 rng(seed);
    layer1_.init(rng);
    layer2_.init(rng);
    class_head_.init(rng);
    if (has_count_head()) {
      count_head_ = DenseLayer(spec.hidden_dim, spec.n_classes + 1);
      count_head_->init(rng);
    }
    if (spec.method == Method::TSoftmax) {
      // softplus^{-1}(t - floor)
      const double target = spec.initial_temperature - SoftplusTemperature::kFloor;
      if (!(target > 0.0)) throw ConfigError("initial temperature must exceed 1e-4");
      theta_ = {target + std::log(-std::expm1(-target))};
    }
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  bool has_count_head() const noexcept { return spec_.method == Method::RSoftmax; }
  bool has_temperature() const noexcept { return spec_.method == Method::TSoftmax; }

  double temperature() const {
    if (!has_temperature()) throw InvalidStateError("model has no learned temperature");
    return SoftplusTemperature::value(theta_[0]);
  }

  ForwardCache forward(std::span<const double> features) const {
    detail::require_same_length(features.size(), spec_.input_dim, "MultiLabelModel::forward");
    ForwardCache c;
    c.version = version_;
    c.input.assign(features.begin(), features.end());
    c.hidden1 = layer1_.forward(c.input);
    relu_inplace(c.hidden1);
    c.hidden2 = layer2_.forward(c.hidden1);
    relu_inplace(c.hidden2);
    c.logits = class_head_.forward(c.hidden2);
    if (count_head_) c.count_logits = count_head_->forward(c.hidden2);
    return c;
  }

  ParamGrads zero_grads() const {
    ParamGrads g;
    for (auto blob : blobs()) g.emplace_back(blob.size(), 0.0);
    return g;
  }

  // Accumulates parameter gradients for one sample into grads.
  // grad_count must be empty iff there is no count head.
  void backward(const ForwardCache& cache, std::span<const double> grad_logits,
                std::span<const double> grad_count, double grad_temperature,
                ParamGrads& grads) const {
    if (cache.version != version_) {
      throw InvalidStateError("forward cache is stale: parameters changed since forward()");
    }
    detail::require_same_length(grad_logits.size(), spec_.n_classes, "backward logits");
    detail::require_same_length(grads.size(), blobs().size(), "backward grads");
    if (count_head_) {
      detail::require_same_length(grad_count.size(), spec_.n_classes + 1, "backward count");
    }

    std::vector<double> dh2 = class_head_.backward(cache.hidden2, grad_logits, grads[4], grads[5]);
    if (count_head_) {
      const auto dc = count_head_->backward(cache.hidden2, grad_count, grads[6], grads[7]);
      for (std::size_t i = 0; i < dh2.size(); ++i) dh2[i] += dc[i];
    }
    relu_backward(cache.hidden2, dh2);
    std::vector<double> dh1 = layer2_.backward(cache.hidden1, dh2, grads[2], grads[3]);
    relu_backward(cache.hidden1, dh1);
    layer1_.backward(cache.input, dh1, grads[0], grads[1], /*want_input=*/false);
    if (has_temperature()) {
      grads.back()[0] += grad_temperature * SoftplusTemperature::derivative(theta_[0]);
    }
  }

  // Ordered parameter blobs:
  //   layer1.weight, layer1.bias, layer2.weight, layer2.bias,
  //   class_head.weight, class_head.bias, [count_head.weight, count_head.bias],
  //   [temperature.theta]
  // Mutable access invalidates outstanding forward caches.
  std::vector<std::span<double>> parameters() {
    ++version_;
    std::vector<std::span<double>> out{layer1_.weight.flat(), layer1_.bias,
                                       layer2_.weight.flat(), layer2_.bias,
                                       class_head_.weight.flat(), class_head_.bias};
    if (count_head_) {
      out.push_back(count_head_->weight.flat());
      out.push_back(count_head_->bias);
    }
    if (has_temperature()) out.push_back(theta_);
    return out;
  }

  std::vector<std::span<const double>> blobs() const {
    std::vector<std::span<const double>> out{layer1_.weight.flat(), layer1_.bias,
                                             layer2_.weight.flat(), layer2_.bias,
                                             class_head_.weight.flat(), class_head_.bias};
    if (count_head_) {
      out.push_back(count_head_->weight.flat());
      out.push_back(count_head_->bias);
    }
    if (has_temperature()) out.push_back(theta_);
    return out;
  }

  std::vector<std::string> blob_names() const {
    std::vector<std::string> out{"layer1.weight", "layer1.bias", "layer2.weight",
                                 "layer2.bias", "class_head.weight", "class_head.bias"};
    if (count_head_) {
      out.emplace_back("count_head.weight");
      out.emplace_back("count_head.bias");
    }
    if (has_temperature()) out.emplace_back("temperature.theta");
    return out;
  }

 private:
  static void relu_inplace(std::vector<double>& v) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
  }
  static void relu_backward(std::span<const double> activated, std::vector<double>& grad) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!(activated[i] > 0.0)) grad[i] = 0.0;
    }
  }

  ModelSpec spec_;
  DenseLayer layer1_;
  DenseLayer layer2_;
  DenseLayer class_head_;
  std::optional<DenseLayer> count_head_;
  std::vector<double> theta_;
  std::uint64_t version_ = 0;
};

// Sparsity rate that leaves exactly k of n components nonzero.
inline SparsityRate rate_for_count(std::size_t n, std::size_t k) {
  return SparsityRate(static_cast<double>(n - k) / static_cast<double>(n));
}

// Predicted number of labels: argmax of the count logits over bins 1..n.
inline std::size_t predicted_count(std::span<const double> count_logits) {
  return 1 + argmax(count_logits.subspan(1));
}

struct SampleLoss {
  double value = 0.0;
  std::vector<double> grad_logits;
  std::vector<double> grad_count;
  double grad_temperature = 0.0;
};

// Per-sample training objective for the model's method. For RSoftmax the
// rate fed to the multi-label loss is the ground-truth rate (n - k*)/n and the
// count head adds count_weight * CE(count logits, k*).
inline SampleLoss training_loss(const MultiLabelModel& model, const ForwardCache& cache,
                                std::span<const std::uint8_t> labels) {
  const ModelSpec& spec = model.spec();
  detail::require_same_length(labels.size(), spec.n_classes, "training_loss");
  SampleLoss out;
  switch (spec.method) {
    case Method::Softmax: {
      auto r = cross_entropy(cache.logits, target_distribution(labels));
      out.value = r.value;
      out.grad_logits = std::move(r.grad);
      break;
    }
    case Method::SparsemaxHuber: {
      auto r = sparsemax_huber_loss(cache.logits, target_distribution(labels));
      out.value = r.value;
      out.grad_logits = std::move(r.grad);
      break;
    }
    case Method::SparsemaxHinge: {
      auto r = sparsemax_hinge_loss(cache.logits, labels);
      out.value = r.value;
      out.grad_logits = std::move(r.grad);
      break;
    }
    case Method::TSoftmax: {
      auto r = multilabel_loss(cache.logits, labels, MappingKind::t_softmax(Temperature(model.temperature())));
      out.value = r.value;
      out.grad_logits = std::move(r.grad);
      out.grad_temperature = r.temperature_grad;
      break;
    }
    case Method::RSoftmax: {
      std::size_t k = 0;
      for (auto v : labels) k += v;
      auto r = multilabel_loss(cache.logits, labels, rate_for_count(spec.n_classes, k), spec.rate_grad);
      auto c = count_head_loss(cache.count_logits, k);
      out.value = r.value + spec.count_weight * c.value;
      out.grad_logits = std::move(r.grad);
      out.grad_count = std::move(c.grad);
      for (double& g : out.grad_count) g *= spec.count_weight;
      break;
    }
  }
  return out;
}

// Indices with strictly positive probability.
inline std::vector<std::size_t> nonzero_labels(std::span<const double> p) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) out.push_back(i);
  }
  return out;
}

inline std::vector<std::size_t> threshold_labels(std::span<const double> p, double p0) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= p0) out.push_back(i);
  }
  return out;
}

// Labels from the model's output mapping. p0 is used only by Softmax.
inline std::vector<std::size_t> predict_labels(const MultiLabelModel& model, const ForwardCache& cache,
                                               double p0 = 0.0) {
  const std::size_t n = model.spec().n_classes;
  switch (model.spec().method) {
    case Method::Softmax: return threshold_labels(softmax(cache.logits), p0);
    case Method::SparsemaxHuber:
    case Method::SparsemaxHinge: return nonzero_labels(sparsemax(cache.logits));
    case Method::TSoftmax:
      return nonzero_labels(t_softmax(cache.logits, Temperature(model.temperature())));
    case Method::RSoftmax: {
      const std::size_t k = predicted_count(cache.count_logits);
      return nonzero_labels(r_softmax(cache.logits, rate_for_count(n, k)));
    }
  }
  return {};
}

inline std::vector<std::size_t> predict_labels(const MultiLabelModel& model,
                                               std::span<const double> features, double p0 = 0.0) {
  return predict_labels(model, model.forward(features), p0);
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update. Moment buffers are sized on first use.
inline void adam_step(AdamState& state, std::span<const std::span<double>> params, const ParamGrads& grads) {
  detail::require_same_length(params.size(), grads.size(), "adam_step");
  if (state.first_moment.empty()) {
    for (auto p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  detail::require_same_length(params.size(), state.first_moment.size(), "adam_step state");
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    const auto& g = grads[b];
    detail::require_same_length(p.size(), g.size(), "adam_step blob");
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace rsoftmax
