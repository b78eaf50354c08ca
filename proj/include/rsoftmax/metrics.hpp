#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "rsoftmax/error.hpp"

namespace rsoftmax {

// Sorted, duplicate-free class indices.
using LabelSet = std::vector<std::size_t>;

enum class F1Mode { Micro, Macro, PerSample };

inline std::string_view to_string(F1Mode m) {
  switch (m) {
    case F1Mode::Micro: return "micro";
    case F1Mode::Macro: return "macro";
    case F1Mode::PerSample: return "sample";
  }
  return "unknown";
}

inline LabelSet label_set(std::span<const std::uint8_t> y) {
  LabelSet out;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i]) out.push_back(i);
  }
  return out;
}

namespace detail {

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Both sets sorted ascending.
inline Confusion confusion(const LabelSet& pred, const LabelSet& truth) {
  Confusion c;
  std::size_t i = 0, j = 0;
  while (i < pred.size() && j < truth.size()) {
    if (pred[i] == truth[j]) {
      ++c.tp, ++i, ++j;
    } else if (pred[i] < truth[j]) {
      ++c.fp, ++i;
    } else {
      ++c.fn, ++j;
    }
  }
  c.fp += pred.size() - i;
  c.fn += truth.size() - j;
  return c;
}

// 2TP / (2TP + FP + FN); an empty comparison counts as a perfect match.
inline double f1_from(const Confusion& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

}  // namespace detail

// Micro pools TP/FP/FN over every sample and class. Macro averages per-class
// F1 over n_classes, with a class that is never predicted and never true
// scoring 1. PerSample averages per-example F1, with empty-vs-empty scoring 1.
inline double f1_score(std::span<const LabelSet> pred, std::span<const LabelSet> truth, F1Mode mode,
                       std::size_t n_classes) {
  detail::require_same_length(pred.size(), truth.size(), "f1_score");
  if (pred.empty()) return 1.0;
  switch (mode) {
    case F1Mode::Micro: {
      detail::Confusion total;
      for (std::size_t s = 0; s < pred.size(); ++s) {
        const auto c = detail::confusion(pred[s], truth[s]);
        total.tp += c.tp, total.fp += c.fp, total.fn += c.fn;
      }
      return detail::f1_from(total);
    }
    case F1Mode::PerSample: {
      double sum = 0.0;
      for (std::size_t s = 0; s < pred.size(); ++s) sum += detail::f1_from(detail::confusion(pred[s], truth[s]));
      return sum / static_cast<double>(pred.size());
    }
    case F1Mode::Macro: {
      std::vector<detail::Confusion> per_class(n_classes);
      auto index = [&](std::size_t k) -> detail::Confusion& {
        if (k >= n_classes) throw ShapeError("label index outside n_classes");
        return per_class[k];
      };
      for (std::size_t s = 0; s < pred.size(); ++s) {
        std::size_t i = 0, j = 0;
        const auto& p = pred[s];
        const auto& t = truth[s];
        while (i < p.size() || j < t.size()) {
          if (j == t.size() || (i < p.size() && p[i] < t[j])) {
            ++index(p[i++]).fp;
          } else if (i == p.size() || t[j] < p[i]) {
            ++index(t[j++]).fn;
          } else {
            ++index(p[i]).tp;
            ++i, ++j;
          }
        }
      }
      double sum = 0.0;
      for (const auto& c : per_class) sum += detail::f1_from(c);
      return sum / static_cast<double>(n_classes);
    }
  }
  return 0.0;
}

struct F1Triple {
  double micro = 0.0;
  double macro = 0.0;
  double per_sample = 0.0;
};

inline F1Triple f1_all(std::span<const LabelSet> pred, std::span<const LabelSet> truth, std::size_t n_classes) {
  return {f1_score(pred, truth, F1Mode::Micro, n_classes), f1_score(pred, truth, F1Mode::Macro, n_classes),
          f1_score(pred, truth, F1Mode::PerSample, n_classes)};
}

}  // namespace rsoftmax
