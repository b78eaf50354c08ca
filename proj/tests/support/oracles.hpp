#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's mapping code except where a test explicitly compares
// against it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

// Central finite-difference gradient of f at x.
inline Vec numeric_gradient(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-6) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ||a - b|| / max(||a||, ||b||); zero when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  Vec d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double scale = std::max(norm2(a), norm2(b));
  if (scale == 0.0) return 0.0;
  return norm2(d) / scale;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vec normal_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Smallest gap between any two entries.
inline double min_gap(std::span<const double> x) {
  Vec s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < s.size(); ++i) g = std::min(g, s[i] - s[i - 1]);
  return g;
}

// Random vector whose entries are pairwise at least `gap` apart.
inline Vec distinct_vector(std::size_t n, std::mt19937_64& rng, double gap = 1e-3) {
  for (;;) {
    Vec v = normal_vector(n, rng, 2.0);
    if (n < 2 || min_gap(v) >= gap) return v;
  }
}

// ---- simplex projection by support enumeration ----------------------------
//
// For every nonempty support S the KKT point is p_i = x_i - tau on S with
// tau = (sum_S x - 1) / |S|. The projection is the feasible candidate
// (p >= 0 on S) of least squared distance. Exponential in n; meant for n <= 8.
inline Vec brute_force_simplex_projection(std::span<const double> x) {
  const std::size_t n = x.size();
  Vec best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    double sum = 0.0;
    std::size_t size = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        sum += x[i];
        ++size;
      }
    }
    const double tau = (sum - 1.0) / static_cast<double>(size);
    Vec p(n, 0.0);
    bool feasible = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        p[i] = x[i] - tau;
        if (p[i] < -1e-15) feasible = false;
      }
    }
    if (!feasible) continue;
    double dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) dist += (p[i] - x[i]) * (p[i] - x[i]);
    if (dist < best_dist) {
      best_dist = dist;
      best = p;
    }
  }
  return best;
}

// ---- direct formula evaluations ---------------------------------------------

inline Vec softmax_direct(std::span<const double> x) {
  Vec e(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += (e[i] = std::exp(x[i]));
  for (double& v : e) v /= total;
  return e;
}

// sum_i w_i exp(x_i) normalisation, no max shift.
inline Vec weighted_softmax_direct(std::span<const double> x, std::span<const double> w) {
  Vec e(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += (e[i] = w[i] * std::exp(x[i]));
  for (double& v : e) v /= total;
  return e;
}

// Quantile by explicit sorting and linear interpolation at h = q (n - 1).
inline double quantile_direct(std::span<const double> x, double q) {
  Vec s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double h = q * static_cast<double>(s.size() - 1);
  const double lo = std::floor(h);
  const auto i = static_cast<std::size_t>(lo);
  if (i + 1 >= s.size()) return s.back();
  return s[i] + (h - lo) * (s[i + 1] - s[i]);
}

// r-softmax straight from its definition: t_r = max - quantile,
// w_i = ReLU(x_i + t_r - max). Valid for 0 < r < 1 with a unique maximum.
inline Vec r_softmax_direct(std::span<const double> x, double r) {
  const double m = *std::max_element(x.begin(), x.end());
  const double t = m - quantile_direct(x, r);
  Vec w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) w[i] = std::max(0.0, x[i] + t - m);
  return weighted_softmax_direct(x, w);
}

// r-softmax with t_r frozen at a given value: the function whose gradient the
// detached backward pass returns.
inline Vec r_softmax_frozen(std::span<const double> x, double t_r) {
  const double m = *std::max_element(x.begin(), x.end());
  Vec w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) w[i] = std::max(0.0, x[i] + t_r - m);
  return weighted_softmax_direct(x, w);
}

inline Vec t_softmax_direct(std::span<const double> x, double t) {
  const double m = *std::max_element(x.begin(), x.end());
  Vec w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) w[i] = std::max(0.0, x[i] + t - m);
  return weighted_softmax_direct(x, w);
}

// ---- kink distances -----------------------------------------------------------
//
// Distance from x to the nearest point where the mapping is not
// differentiable. Gradient checks resample points closer than 1e-4.

inline double top_gap(std::span<const double> x) {
  if (x.size() < 2) return std::numeric_limits<double>::infinity();
  Vec s(x.begin(), x.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  return s[0] - s[1];
}

inline double t_softmax_kink_distance(std::span<const double> x, double t) {
  const double m = *std::max_element(x.begin(), x.end());
  double d = top_gap(x);
  for (double v : x) d = std::min(d, std::abs(t - (m - v)));
  return d;
}

inline double r_softmax_kink_distance(std::span<const double> x, double r) {
  const double q = quantile_direct(x, r);
  double d = std::min(top_gap(x), min_gap(x));
  for (double v : x) {
    if (v != q) d = std::min(d, std::abs(v - q));
  }
  return d;
}

inline double sparsemax_kink_distance(std::span<const double> x, std::span<const double> projection) {
  // tau = x_i - p_i on the support
  double tau = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (projection[i] > 0.0) {
      tau = x[i] - projection[i];
      break;
    }
  }
  double d = std::numeric_limits<double>::infinity();
  for (double v : x) d = std::min(d, std::abs(v - tau));
  return d;
}

// Distance to the nearest pairwise-hinge kink: eta_i - (z_i - z_j) = 0.
inline double hinge_kink_distance(std::span<const double> z, std::span<const std::uint8_t> y) {
  double positives = 0.0;
  for (auto v : y) positives += v;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < z.size(); ++j) {
      if (y[j]) continue;
      d = std::min(d, std::abs(1.0 / positives - (z[i] - z[j])));
    }
  }
  return d;
}

// ---- plain dense algebra ------------------------------------------------------

// y = W x + b with W stored row-major as out x in.
inline Vec affine(std::span<const double> w, std::span<const double> b, std::span<const double> x) {
  Vec y(b.begin(), b.end());
  for (std::size_t o = 0; o < y.size(); ++o) {
    for (std::size_t i = 0; i < x.size(); ++i) y[o] += w[o * x.size() + i] * x[i];
  }
  return y;
}

// C = A B for row-major A (m x k) and B (k x n).
inline Vec matmul(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t k, std::size_t n) {
  Vec c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + j];
      c[i * n + j] = s;
    }
  }
  return c;
}

}  // namespace oracle
