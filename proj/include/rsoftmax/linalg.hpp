#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "rsoftmax/error.hpp"

namespace rsoftmax {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a (n x k) * b (k x m)
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  detail::require_same_length(a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      if (s == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += s * src[j];
    }
  }
  return out;
}

// a^T (k x n) * b (n x m) without materializing the transpose
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  detail::require_same_length(a.rows(), b.rows(), "matmul_tn");
  Matrix out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto src = b.row(r);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = a(r, i);
      if (s == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += s * src[j];
    }
  }
  return out;
}

// a (n x k) * b^T (k x m)
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  detail::require_same_length(a.cols(), b.cols(), "matmul_nt");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
      out(i, j) = s;
    }
  }
  return out;
}

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline void glorot_uniform(Matrix& m, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& v : m.flat()) v = dist(rng);
}

// Affine layer y = W x + b with W stored out x in.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out) : weight(out, in), bias(out, 0.0) {}

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }

  void init(std::mt19937_64& rng) {
    glorot_uniform(weight, in_dim(), out_dim(), rng);
    std::fill(bias.begin(), bias.end(), 0.0);
  }

  std::vector<double> forward(std::span<const double> x) const {
    detail::require_same_length(x.size(), in_dim(), "DenseLayer::forward");
    std::vector<double> y(bias);
    for (std::size_t o = 0; o < out_dim(); ++o) {
      auto w = weight.row(o);
      double s = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
      y[o] += s;
    }
    return y;
  }

  // Accumulates dW += dy x^T and db += dy. Returns W^T dy when want_input.
  std::vector<double> backward(std::span<const double> x, std::span<const double> dy,
                               std::span<double> grad_weight, std::span<double> grad_bias,
                               bool want_input = true) const {
    std::vector<double> dx(want_input ? in_dim() : 0, 0.0);
    for (std::size_t o = 0; o < out_dim(); ++o) {
      const double g = dy[o];
      grad_bias[o] += g;
      if (g == 0.0) continue;
      auto w = weight.row(o);
      double* gw = grad_weight.data() + o * in_dim();
      for (std::size_t i = 0; i < in_dim(); ++i) gw[i] += g * x[i];
      if (want_input) {
        for (std::size_t i = 0; i < in_dim(); ++i) dx[i] += g * w[i];
      }
    }
    return dx;
  }
};

}  // namespace rsoftmax
