#pragma once

// Single-head scaled dot-product self-attention with a pluggable row mapping.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "rsoftmax/error.hpp"
#include "rsoftmax/linalg.hpp"
#include "rsoftmax/probmap.hpp"

namespace rsoftmax {

// Linear ramp r(step) = target_r * min(1, step / warmup_steps).
struct SparsitySchedule {
  double target_r = 0.0;
  std::size_t warmup_steps = 0;

  SparsityRate rate(std::size_t step) const {
    if (warmup_steps == 0 || step >= warmup_steps) return SparsityRate(target_r);
    return SparsityRate(target_r * static_cast<double>(step) / static_cast<double>(warmup_steps));
  }
};

struct AttentionBlock {
  Matrix query;  // d_model x d_k
  Matrix key;    // d_model x d_k
  Matrix value;  // d_model x d_k
  // Row mapping. For RSoftmax only the gradient mode is read from here; the
  // rate is supplied per forward call.
  MappingKind mapping = MappingKind::softmax();
  // Round the rate down to a multiple of 1/L, so a row of length L gets
  // exactly floor(r * L) zeros.
  bool quantize_rate = true;

  AttentionBlock() = default;
  AttentionBlock(std::size_t d_model, std::size_t d_k, MappingKind kind)
      : query(d_model, d_k), key(d_model, d_k), value(d_model, d_k), mapping(kind) {
    if (d_model == 0 || d_k == 0) throw ShapeError("attention dimensions must be positive");
  }

  std::size_t d_model() const noexcept { return query.rows(); }
  std::size_t d_k() const noexcept { return query.cols(); }

  void init(std::mt19937_64& rng) {
    glorot_uniform(query, d_model(), d_k(), rng);
    glorot_uniform(key, d_model(), d_k(), rng);
    glorot_uniform(value, d_model(), d_k(), rng);
  }
};

struct AttentionCache {
  Matrix input;
  Matrix q, k, v;
  Matrix scores;     // QK^T / sqrt(d_k)
  Matrix attention;  // row-mapped scores
  MappingKind row_mapping = MappingKind::softmax();
};

struct AttentionOutput {
  Matrix output;  // L x d_k
  AttentionCache cache;

  const Matrix& attention() const noexcept { return cache.attention; }
};

struct AttentionGrads {
  Matrix input;   // d/dX
  Matrix query;   // d/dW_q
  Matrix key;     // d/dW_k
  Matrix value;   // d/dW_v
  Matrix scores;  // d/d(QK^T), before the 1/sqrt(d_k) scaling
};

inline SparsityRate effective_rate(const AttentionBlock& block, SparsityRate r, std::size_t length) {
  if (!block.quantize_rate) return r;
  const double zeros = std::floor(r.value() * static_cast<double>(length) + 1e-9);
  return SparsityRate(std::min(zeros, static_cast<double>(length)) / static_cast<double>(length));
}

// X is L x d_model. One sparsity rate is shared by every row.
inline AttentionOutput attend(const AttentionBlock& block, const Matrix& x, SparsityRate r = SparsityRate(0.0)) {
  if (x.rows() == 0) throw ShapeError("attention needs at least one token");
  detail::require_same_length(x.cols(), block.d_model(), "attend");
  AttentionOutput out;
  auto& c = out.cache;
  c.input = x;
  c.q = matmul(x, block.query);
  c.k = matmul(x, block.key);
  c.v = matmul(x, block.value);
  c.scores = matmul_nt(c.q, c.k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(block.d_k()));
  for (double& s : c.scores.flat()) s *= scale;

  c.row_mapping = block.mapping;
  if (block.mapping.tag() == Mapping::RSoftmax) {
    c.row_mapping = MappingKind::r_softmax(effective_rate(block, r, x.rows()), block.mapping.grad_mode());
  }
  c.attention = Matrix(x.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const Vector p = apply_mapping(c.row_mapping, c.scores.row(i));
    std::copy(p.begin(), p.end(), c.attention.row(i).begin());
  }
  out.output = matmul(c.attention, c.v);
  return out;
}

inline AttentionGrads backward_attend(const AttentionBlock& block, const AttentionCache& c, const Matrix& grad_output) {
  detail::require_same_length(grad_output.rows(), c.attention.rows(), "backward_attend rows");
  detail::require_same_length(grad_output.cols(), block.d_k(), "backward_attend cols");
  const double scale = 1.0 / std::sqrt(static_cast<double>(block.d_k()));

  const Matrix grad_attention = matmul_nt(grad_output, c.v);
  const Matrix grad_v = matmul_tn(c.attention, grad_output);
  Matrix grad_scores(c.scores.rows(), c.scores.cols());
  for (std::size_t i = 0; i < c.scores.rows(); ++i) {
    const MappingGrad g = backward(c.row_mapping, c.scores.row(i), grad_attention.row(i));
    for (std::size_t j = 0; j < g.logits.size(); ++j) grad_scores(i, j) = g.logits[j] * scale;
  }
  const Matrix grad_q = matmul(grad_scores, c.k);
  const Matrix grad_k = matmul_tn(grad_scores, c.q);

  AttentionGrads g;
  g.scores = grad_scores;
  g.query = matmul_tn(c.input, grad_q);
  g.key = matmul_tn(c.input, grad_k);
  g.value = matmul_tn(c.input, grad_v);
  g.input = matmul_nt(grad_q, block.query);
  const Matrix from_k = matmul_nt(grad_k, block.key);
  const Matrix from_v = matmul_nt(grad_v, block.value);
  auto dst = g.input.flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += from_k.flat()[i] + from_v.flat()[i];
  return g;
}

}  // namespace rsoftmax
