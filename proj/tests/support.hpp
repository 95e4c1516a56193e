#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "conformal/fusion.hpp"
#include "conformal/network.hpp"
#include "conformal/sparse.hpp"

namespace testing_support {

using namespace conformal;

inline std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0,
                                          double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
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

/// Textbook 1-D cross-correlation, written from scratch: pad, dilate, stride.
inline std::vector<double> naive_conv1d(std::span<const double> x, std::span<const double> w, std::size_t pad,
                                        std::size_t dil, std::size_t stride) {
  std::vector<double> padded(x.size() + 2 * pad, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) padded[i + pad] = x[i];
  const std::size_t span = (w.size() - 1) * dil + 1;
  std::vector<double> out;
  for (std::size_t s = 0; s + span <= padded.size(); s += stride) {
    double acc = 0.0;
    for (std::size_t t = 0; t < w.size(); ++t) acc += w[t] * padded[s + t * dil];
    out.push_back(acc);
  }
  return out;
}

inline std::vector<double> dense_apply(const DenseMatrix& m, std::span<const double> x) {
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) y[r] += m(r, c) * x[c];
  return y;
}

/// Data part of a homogeneous vector squared, scaled as in the ReSPro update.
inline double respro_increment(std::span<const double> z, double alpha) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < z.size(); ++i) s += z[i] * z[i];
  return s / (2.0 * alpha);
}

/// Nested evaluation Y_l = (F_M + F_T Z) Z with Z = U_l Y_{l-1}, dense.
inline std::vector<double> nested_recursion(const LoweredNetwork& lowered, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : lowered.stages) {
    std::vector<double> z = dense_apply(s.linear.to_dense(), y);
    if (s.alpha) z.back() = *s.alpha / 2.0 * z.back() + respro_increment(z, *s.alpha);
    y = std::move(z);
  }
  return y;
}

/// The expanded sum written term by term: A_k ... A_1 X plus one quadratic
/// correction per ReSPro, each pushed through the later F_M U factors.
inline std::vector<double> induction_expansion(const LoweredNetwork& lowered, std::span<const double> x) {
  const auto& st = lowered.stages;
  std::vector<DenseMatrix> a, u;
  for (const auto& s : st) {
    u.push_back(s.linear.to_dense());
    DenseMatrix f = DenseMatrix::identity(u.back().rows());
    if (s.alpha) f(f.rows() - 1, f.cols() - 1) = *s.alpha / 2.0;
    a.push_back(f * u.back());
  }
  std::vector<double> xv(x.begin(), x.end());
  std::vector<double> linear = xv;
  for (const auto& m : a) linear = dense_apply(m, linear);

  std::vector<double> total = linear;
  for (std::size_t l = 0; l < st.size(); ++l) {
    if (!st[l].alpha) continue;
    std::vector<double> p = xv;
    for (std::size_t m = 0; m <= l; ++m) p = dense_apply(u[m], p);
    // the correction lives in the homogeneous slot only
    std::vector<double> corr(p.size(), 0.0);
    corr.back() = respro_increment(p, *st[l].alpha);
    for (std::size_t m = l + 1; m < st.size(); ++m) corr = dense_apply(a[m], corr);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += corr[i];
  }
  return total;
}

struct RandomNetOptions {
  std::size_t max_respro = 4;
  std::size_t max_d_in = 16;
  std::size_t max_width = 48;
  bool allow_2d = true;
  bool allow_dropout_mask = true;
};

inline Conv random_conv(std::mt19937_64& rng, const ShapeSpec& in) {
  const std::size_t rank = in.rank();
  Conv c;
  c.out_channels = rank == 2 ? pick(rng, 1, 2) : pick(rng, 1, 2);
  for (std::size_t d = 0; d < rank; ++d) {
    c.kernel.push_back(pick(rng, 1, 3));
    c.padding.push_back(pick(rng, 0, 1));
    c.dilation.push_back(pick(rng, 1, 2));
    c.stride.push_back(pick(rng, 1, 2));
  }
  std::size_t taps = c.out_channels * in.channels;
  for (auto k : c.kernel) taps *= k;
  c.weights = uniform_vector(rng, taps, -0.8, 0.8);
  return c;
}

inline AvgPool random_pool(std::mt19937_64& rng, const ShapeSpec& in) {
  AvgPool p;
  for (std::size_t d = 0; d < in.rank(); ++d) {
    p.kernel.push_back(pick(rng, 1, 2));
    p.padding.push_back(pick(rng, 0, p.kernel.back() / 2));
    p.stride.push_back(pick(rng, 1, 2));
  }
  return p;
}

inline bool try_append(NetworkSpec& net, ShapeSpec& shape, LayerSpec layer, std::size_t max_width) {
  try {
    const ShapeSpec next = output_shape(layer, shape);
    if (next.size() == 0 || next.size() > max_width) return false;
    net.layers.push_back(std::move(layer));
    shape = next;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

inline void append_linear(std::mt19937_64& rng, NetworkSpec& net, ShapeSpec& shape, const RandomNetOptions& o) {
  for (int attempt = 0; attempt < 20; ++attempt) {
    const std::size_t choice = pick(rng, 0, 9);
    LayerSpec layer;
    if (choice < 5) layer = random_conv(rng, shape);
    else if (choice < 7) layer = random_pool(rng, shape);
    else if (choice < 9) {
      Dropout d{0.3, std::nullopt};
      if (o.allow_dropout_mask && pick(rng, 0, 1)) {
        std::vector<std::uint8_t> mask(shape.size());
        for (auto& m : mask) m = static_cast<std::uint8_t>(pick(rng, 0, 3) != 0);
        d.mask = std::move(mask);
      }
      layer = d;
    } else {
      layer = Flatten{};
    }
    if (try_append(net, shape, std::move(layer), o.max_width)) return;
  }
}

/// Mixed 1-D / 2-D multi-channel networks with 1..max_respro ReSPro stages,
/// 0..2 linear layers before each and an optional trailing linear run.
inline NetworkSpec random_network(std::mt19937_64& rng, const RandomNetOptions& o = {}) {
  NetworkSpec net;
  if (o.allow_2d && pick(rng, 0, 1)) {
    for (;;) {
      const std::size_t c = pick(rng, 1, 2), h = pick(rng, 2, 4), w = pick(rng, 2, 4);
      if (c * h * w <= o.max_d_in) {
        net.input = {c, {h, w}};
        break;
      }
    }
  } else {
    net.input = {1, {pick(rng, 2, o.max_d_in)}};
  }
  net.order = pick(rng, 0, 1) ? ElementOrder::channel_major : ElementOrder::channel_last;
  net.encoding = pick(rng, 0, 3) ? Encoding::norm : Encoding::canonical;
  ShapeSpec shape = net.input;
  const std::size_t k = pick(rng, 1, o.max_respro);
  for (std::size_t s = 0; s < k; ++s) {
    const std::size_t n_linear = pick(rng, 0, 2);
    for (std::size_t i = 0; i < n_linear; ++i) append_linear(rng, net, shape, o);
    ReSPro r;
    if (pick(rng, 0, 3) == 0) r.alpha = std::uniform_real_distribution<double>(0.5, 4.0)(rng);
    net.layers.push_back(r);
  }
  if (pick(rng, 0, 2) == 0) append_linear(rng, net, shape, o);
  return net;
}

}  // namespace testing_support
