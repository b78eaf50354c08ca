#pragma once

// Training losses for multi-label classification. Each returns the loss value
// together with its (sub)gradient w.r.t. the logits.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rsoftmax/error.hpp"
#include "rsoftmax/probmap.hpp"

namespace rsoftmax {

// Binary label indicator, one byte per class.
using LabelVector = std::vector<std::uint8_t>;

struct LossResult {
  double value = 0.0;
  Vector grad;
  // d(loss)/dt when the mapping is t-softmax; zero otherwise.
  double temperature_grad = 0.0;
};

namespace detail {

inline std::size_t validate_labels(std::span<const std::uint8_t> y) {
  std::size_t positives = 0;
  for (auto v : y) {
    if (v > 1) throw InvalidTargetError("labels must be 0 or 1");
    positives += v;
  }
  if (positives == 0) throw InvalidTargetError("label vector has no positive entry");
  return positives;
}

inline double log_sum_exp(std::span<const double> z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace detail

// eta = y / |y|_1
inline Vector target_distribution(std::span<const std::uint8_t> y) {
  const std::size_t positives = detail::validate_labels(y);
  Vector eta(y.size(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i]) eta[i] = 1.0 / static_cast<double>(positives);
  }
  return eta;
}

// || y * (map(z) - eta) ||^2 + sum_{y_i = 1, y_j = 0} max(0, eta_i - (z_i - z_j))
//
// The squared term is masked elementwise by y. Pairs are summed, not
// averaged. At a hinge kink the zero subgradient is used.
inline LossResult multilabel_loss(std::span<const double> z, std::span<const std::uint8_t> y,
                                  const MappingKind& kind) {
  detail::validate_logits(z);
  detail::require_same_length(z.size(), y.size(), "multilabel_loss");
  const Vector eta = target_distribution(y);
  const std::size_t n = z.size();

  LossResult out;
  const Vector p = apply_mapping(kind, z);
  Vector upstream(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i]) {
      const double d = p[i] - eta[i];
      out.value += d * d;
      upstream[i] = 2.0 * d;
    }
  }
  MappingGrad g = backward(kind, z, upstream);
  out.grad = std::move(g.logits);
  out.temperature_grad = g.temperature;

  for (std::size_t i = 0; i < n; ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (y[j]) continue;
      const double margin = eta[i] - (z[i] - z[j]);
      if (margin > 0.0) {
        out.value += margin;
        out.grad[i] -= 1.0;
        out.grad[j] += 1.0;
      }
    }
  }
  return out;
}

inline LossResult multilabel_loss(std::span<const double> z, std::span<const std::uint8_t> y,
                                  SparsityRate r, RGradMode mode = RGradMode::Full) {
  return multilabel_loss(z, y, MappingKind::r_softmax(r, mode));
}

// The same masked-square plus pairwise-hinge template with sparsemax margins.
inline LossResult sparsemax_hinge_loss(std::span<const double> z, std::span<const std::uint8_t> y) {
  return multilabel_loss(z, y, MappingKind::sparsemax());
}

// -sum eta_i log softmax(z)_i
inline LossResult cross_entropy(std::span<const double> z, std::span<const double> eta) {
  detail::validate_logits(z);
  detail::require_same_length(z.size(), eta.size(), "cross_entropy");
  const double lse = detail::log_sum_exp(z);
  LossResult out;
  double eta_sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out.value -= eta[i] * (z[i] - lse);
    eta_sum += eta[i];
  }
  out.grad = softmax(z);
  for (std::size_t i = 0; i < z.size(); ++i) out.grad[i] = out.grad[i] * eta_sum - eta[i];
  return out;
}

// Sparsemax loss:
//   -eta.z + 1/2 sum_{j in S(z)} (z_j^2 - tau^2) + 1/2 |eta|^2
// Its gradient is sparsemax(z) - eta, which is what grad holds.
inline LossResult sparsemax_huber_loss(std::span<const double> z, std::span<const double> eta) {
  detail::validate_logits(z);
  detail::require_same_length(z.size(), eta.size(), "sparsemax_huber_loss");
  const double tau = sparsemax_threshold(z);
  LossResult out;
  double value = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    value += 0.5 * eta[i] * eta[i] - eta[i] * z[i];
    if (z[i] > tau) value += 0.5 * (z[i] * z[i] - tau * tau);
  }
  out.value = value;
  out.grad = sparsemax(z);
  for (std::size_t i = 0; i < z.size(); ++i) out.grad[i] -= eta[i];
  return out;
}

// Cross-entropy of a count head with n + 1 bins (label counts 0..n) against
// the true count, which must lie in [1, n].
inline LossResult count_head_loss(std::span<const double> count_logits, std::size_t true_count) {
  detail::validate_logits(count_logits);
  const std::size_t n = count_logits.size() - 1;
  if (true_count < 1 || true_count > n) {
    throw InvalidTargetError("true label count " + std::to_string(true_count) +
                             " outside [1, " + std::to_string(n) + "]");
  }
  LossResult out;
  out.value = detail::log_sum_exp(count_logits) - count_logits[true_count];
  out.grad = softmax(count_logits);
  out.grad[true_count] -= 1.0;
  return out;
}

}  // namespace rsoftmax
