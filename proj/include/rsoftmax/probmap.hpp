#pragma once

// Probability mapping functions: softmax, weighted softmax, t-softmax,
// r-softmax and sparsemax, together with their vector-Jacobian products.
//
// Every function takes the logits by span and returns a fresh vector; none of
// them keep state, so they can be called concurrently on different rows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsoftmax/error.hpp"

namespace rsoftmax {

using Vector = std::vector<double>;

class Temperature {
 public:
  explicit Temperature(double t) : t_(t) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw InvalidParameterError("temperature must be finite and > 0, got " + std::to_string(t));
    }
  }
  double value() const noexcept { return t_; }

 private:
  double t_;
};

// Requested fraction of exactly-zero output components.
class SparsityRate {
 public:
  explicit SparsityRate(double r) : r_(r) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw InvalidParameterError("sparsity rate must lie in [0, 1], got " + std::to_string(r));
    }
  }
  double value() const noexcept { return r_; }

 private:
  double r_;
};

// How the r-softmax backward pass treats the threshold t_r.
//   Full:     differentiate through the interpolated quantile.
//   Detached: t_r is a constant; only max(x) and the exponentials carry gradient.
enum class RGradMode { Full, Detached };

enum class Mapping { Softmax, TSoftmax, RSoftmax, Sparsemax };

inline std::string_view to_string(Mapping m) {
  switch (m) {
    case Mapping::Softmax: return "softmax";
    case Mapping::TSoftmax: return "tsoftmax";
    case Mapping::RSoftmax: return "rsoftmax";
    case Mapping::Sparsemax: return "sparsemax";
  }
  return "unknown";
}

inline std::string_view to_string(RGradMode m) {
  return m == RGradMode::Full ? "full" : "detached";
}

// Mapping selector with its parameter slot. The parameter exists iff the tag
// needs one, which the named constructors enforce.
class MappingKind {
 public:
  static MappingKind softmax() { return MappingKind(Mapping::Softmax, 0.0); }
  static MappingKind sparsemax() { return MappingKind(Mapping::Sparsemax, 0.0); }
  static MappingKind t_softmax(Temperature t) { return MappingKind(Mapping::TSoftmax, t.value()); }
  static MappingKind r_softmax(SparsityRate r, RGradMode mode = RGradMode::Full) {
    MappingKind k(Mapping::RSoftmax, r.value());
    k.mode_ = mode;
    return k;
  }

  Mapping tag() const noexcept { return tag_; }
  bool has_parameter() const noexcept {
    return tag_ == Mapping::TSoftmax || tag_ == Mapping::RSoftmax;
  }
  Temperature temperature() const {
    if (tag_ != Mapping::TSoftmax) throw InvalidParameterError("mapping has no temperature");
    return Temperature(param_);
  }
  SparsityRate rate() const {
    if (tag_ != Mapping::RSoftmax) throw InvalidParameterError("mapping has no sparsity rate");
    return SparsityRate(param_);
  }
  RGradMode grad_mode() const noexcept { return mode_; }

 private:
  MappingKind(Mapping tag, double param) : tag_(tag), param_(param) {}

  Mapping tag_;
  double param_;
  RGradMode mode_ = RGradMode::Full;
};

// Gradient returned by backward(): w.r.t. the logits and, for t-softmax, w.r.t. t.
struct MappingGrad {
  Vector logits;
  double temperature = 0.0;
};

namespace detail {

inline void validate_logits(std::span<const double> x) {
  if (x.empty()) throw InvalidInputError("logit vector must be non-empty");
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidInputError("logit vector contains a non-finite entry");
  }
}

// p_i = w_i exp(x_i - m) / sum_j w_j exp(x_j - m), with m the largest x on the
// support. Each term is taken relative to the first support index attaining m,
// so entries tied with it in both x and w contribute exactly 1 and a tie of k
// entries yields exactly 1/k. Zero weights give bit-zero probabilities.
inline Vector normalize_weighted(std::span<const double> x, std::span<const double> w) {
  std::size_t ref = x.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] > 0.0 && (ref == x.size() || x[i] > x[ref])) ref = i;
  }
  const double m = x[ref];
  Vector p(x.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] > 0.0) {
      p[i] = (w[i] / w[ref]) * std::exp(x[i] - m);
      total += p[i];
    }
  }
  for (double& v : p) v /= total;
  return p;
}

// Support-restricted VJP shared by every weighted softmax whose weights depend
// on x. Writes the direct exp-path contribution into grad and returns
// d(loss)/d(w_i) for every support index (zero elsewhere).
inline Vector weighted_softmax_vjp(std::span<const double> x, std::span<const double> w,
                                   std::span<const double> upstream, Vector& grad) {
  const std::size_t n = x.size();
  double m = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] > 0.0) m = std::max(m, x[i]);
  }
  Vector e(n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] > 0.0) {
      e[i] = std::exp(x[i] - m);
      z += w[i] * e[i];
    }
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] > 0.0) s += w[i] * e[i] / z * upstream[i];
  }
  Vector grad_w(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] > 0.0) {
      const double centered = upstream[i] - s;
      grad[i] += w[i] * e[i] / z * centered;
      grad_w[i] = e[i] / z * centered;
    }
  }
  return grad_w;
}

// Indices ordering x ascending; ties keep index order.
inline std::vector<std::size_t> ascending_order(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  return order;
}

struct QuantilePosition {
  std::size_t lower;  // position in sorted order
  double alpha;       // interpolation weight of position lower + 1
};

inline QuantilePosition quantile_position(std::size_t n, double q) {
  const double h = q * static_cast<double>(n - 1);
  auto lower = static_cast<std::size_t>(std::floor(h));
  if (lower >= n - 1) return {n - 1, 0.0};
  return {lower, h - static_cast<double>(lower)};
}

}  // namespace detail

// Lowest index attaining the maximum.
inline std::size_t argmax(std::span<const double> x) {
  return static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
}

inline Vector onehot(std::size_t n, std::size_t k) {
  Vector p(n, 0.0);
  p.at(k) = 1.0;
  return p;
}

inline Vector softmax(std::span<const double> x) {
  detail::validate_logits(x);
  const double m = *std::max_element(x.begin(), x.end());
  Vector p(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = std::exp(x[i] - m);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

inline Vector weighted_softmax(std::span<const double> x, std::span<const double> w) {
  detail::validate_logits(x);
  detail::require_same_length(x.size(), w.size(), "weighted_softmax");
  double total = 0.0;
  for (double wi : w) {
    if (!(wi >= 0.0) || !std::isfinite(wi)) {
      throw InvalidWeightsError("weights must be finite and nonnegative");
    }
    total += wi;
  }
  if (!(total > 0.0)) throw InvalidWeightsError("weights must not all be zero");
  return detail::normalize_weighted(x, w);
}

// w_i = ReLU(x_i + t - max(x)), evaluated as t - (max(x) - x_i) so that
// t = max(x) - x_j zeroes coordinate j exactly.
inline Vector t_softmax_weights(std::span<const double> x, Temperature t) {
  detail::validate_logits(x);
  const double m = *std::max_element(x.begin(), x.end());
  Vector w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    w[i] = std::max(0.0, t.value() - (m - x[i]));
  }
  return w;
}

inline Vector t_softmax(std::span<const double> x, Temperature t) {
  const Vector w = t_softmax_weights(x, t);
  return detail::normalize_weighted(x, w);
}

// Linearly interpolated quantile over the ascending sort of x at fractional
// position q * (n - 1). q = 0 gives min(x), q = 1 gives max(x).
inline double quantile(std::span<const double> x, double q) {
  detail::validate_logits(x);
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InvalidParameterError("quantile level must lie in [0, 1], got " + std::to_string(q));
  }
  Vector sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const auto pos = detail::quantile_position(sorted.size(), q);
  if (pos.alpha == 0.0) return sorted[pos.lower];
  return sorted[pos.lower] + pos.alpha * (sorted[pos.lower + 1] - sorted[pos.lower]);
}

// Weights of r-softmax for 0 < r < 1. t_r = max(x) - quantile(x, r), so
// x_i + t_r - max(x) = x_i - quantile(x, r); the weight is computed in that
// form, which keeps every coordinate at or below the quantile at bit-zero.
// When the quantile reaches max(x) (tied maxima) t_r = 0 and the weights fall
// back to the t -> 0+ limit: uniform over the tied maxima.
inline Vector r_softmax_weights(std::span<const double> x, SparsityRate r) {
  detail::validate_logits(x);
  const double q = quantile(x, r.value());
  const double m = *std::max_element(x.begin(), x.end());
  Vector w(x.size(), 0.0);
  if (!(m > q)) {
    for (std::size_t i = 0; i < x.size(); ++i) w[i] = x[i] == m ? 1.0 : 0.0;
    return w;
  }
  for (std::size_t i = 0; i < x.size(); ++i) w[i] = std::max(0.0, x[i] - q);
  return w;
}

// r = 0 returns dense softmax; r = 1 returns onehot at the lowest-index argmax.
inline Vector r_softmax(std::span<const double> x, SparsityRate r) {
  detail::validate_logits(x);
  if (r.value() == 0.0) return softmax(x);
  if (r.value() == 1.0) return onehot(x.size(), argmax(x));
  const Vector w = r_softmax_weights(x, r);
  return detail::normalize_weighted(x, w);
}

// Threshold tau of the Euclidean projection onto the simplex.
inline double sparsemax_threshold(std::span<const double> x) {
  detail::validate_logits(x);
  Vector sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double support_sum = sorted[0];
  std::size_t support = 1;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumsum += sorted[j];
    if (1.0 + static_cast<double>(j + 1) * sorted[j] > cumsum) {
      support = j + 1;
      support_sum = cumsum;
    }
  }
  return (support_sum - 1.0) / static_cast<double>(support);
}

inline Vector sparsemax(std::span<const double> x) {
  const double tau = sparsemax_threshold(x);
  Vector p(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) p[i] = std::max(x[i] - tau, 0.0);
  return p;
}

inline Vector apply_mapping(const MappingKind& kind, std::span<const double> x) {
  switch (kind.tag()) {
    case Mapping::Softmax: return softmax(x);
    case Mapping::TSoftmax: return t_softmax(x, kind.temperature());
    case Mapping::RSoftmax: return r_softmax(x, kind.rate());
    case Mapping::Sparsemax: return sparsemax(x);
  }
  throw InvalidParameterError("unknown mapping");
}

// Vector-Jacobian product of apply_mapping(kind, x) with `upstream`. The forward pass
// is recomputed from x.
inline MappingGrad backward(const MappingKind& kind, std::span<const double> x,
                            std::span<const double> upstream) {
  detail::validate_logits(x);
  detail::require_same_length(x.size(), upstream.size(), "backward");
  const std::size_t n = x.size();
  MappingGrad out;
  out.logits.assign(n, 0.0);

  switch (kind.tag()) {
    case Mapping::Softmax: {
      const Vector p = softmax(x);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += p[i] * upstream[i];
      for (std::size_t i = 0; i < n; ++i) out.logits[i] = p[i] * (upstream[i] - s);
      return out;
    }
    case Mapping::Sparsemax: {
      const Vector p = sparsemax(x);
      double s = 0.0;
      std::size_t support = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (p[i] > 0.0) {
          s += upstream[i];
          ++support;
        }
      }
      const double mean = s / static_cast<double>(support);
      for (std::size_t i = 0; i < n; ++i) {
        if (p[i] > 0.0) out.logits[i] = upstream[i] - mean;
      }
      return out;
    }
    case Mapping::TSoftmax: {
      const Vector w = t_softmax_weights(x, kind.temperature());
      const Vector grad_w = detail::weighted_softmax_vjp(x, w, upstream, out.logits);
      // w_i = x_i + t - max(x) on the support.
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        out.logits[i] += grad_w[i];
        total += grad_w[i];
      }
      out.temperature = total;
      out.logits[argmax(x)] -= total;
      return out;
    }
    case Mapping::RSoftmax: {
      const double r = kind.rate().value();
      if (r == 0.0) {
        out.logits = backward(MappingKind::softmax(), x, upstream).logits;
        return out;
      }
      if (r == 1.0) return out;
      const Vector w = r_softmax_weights(x, kind.rate());
      const double q = quantile(x, r);
      const double m = *std::max_element(x.begin(), x.end());
      if (!(m > q)) return out;
      const Vector grad_w = detail::weighted_softmax_vjp(x, w, upstream, out.logits);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        out.logits[i] += grad_w[i];
        total += grad_w[i];
      }
      if (kind.grad_mode() == RGradMode::Detached) {
        // w_i = x_i + t_r - max(x) with t_r frozen.
        out.logits[argmax(x)] -= total;
        return out;
      }
      // w_i = x_i - quantile(x, r); the quantile is linear in its two
      // neighbouring order statistics.
      const auto order = detail::ascending_order(x);
      const auto pos = detail::quantile_position(n, r);
      out.logits[order[pos.lower]] -= (1.0 - pos.alpha) * total;
      if (pos.alpha > 0.0) out.logits[order[pos.lower + 1]] -= pos.alpha * total;
      return out;
    }
  }
  throw InvalidParameterError("unknown mapping");
}

// Trainable temperature stored as an unconstrained scalar theta and
// materialized as t = softplus(theta) + 1e-4.
struct SoftplusTemperature {
  static constexpr double kFloor = 1e-4;

  static double value(double theta) {
    const double sp = theta > 0.0 ? theta + std::log1p(std::exp(-theta)) : std::log1p(std::exp(theta));
    return sp + kFloor;
  }
  // dt/dtheta
  static double derivative(double theta) { return 1.0 / (1.0 + std::exp(-theta)); }
};

}  // namespace rsoftmax
