// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "gdres/discrete_kernel.hpp"
#include "gdres/error.hpp"
#include "gdres/tensor.hpp"

namespace gdres {

enum class Axis { X1, X2 };

namespace detail {

/// Whole-sample reflection of an out-of-range index into [0, n).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// out[y][x] = sum_k taps[k] * in[y][x + k - R] along a row.
inline void correlate_x1(std::span<const double> in, std::span<double> out, int h, int w,
                         std::span<const double> taps, Boundary b) {
  const int R = static_cast<int>(taps.size() / 2);
  std::vector<double> buf(static_cast<std::size_t>(w + 2 * R));
  for (int y = 0; y < h; ++y) {
    const double* row = in.data() + static_cast<std::size_t>(y) * w;
    for (int j = 0; j < w + 2 * R; ++j) {
      const int i = j - R;
      if (i >= 0 && i < w)
        buf[j] = row[i];
      else
        buf[j] = b == Boundary::Mirror ? row[reflect_index(i, w)] : 0.0;
    }
    double* o = out.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) o[x] = 0.0;
    for (int k = 0; k < 2 * R + 1; ++k) {
      const double t = taps[k];
      if (t == 0.0) continue;
      const double* src = buf.data() + k;
      for (int x = 0; x < w; ++x) o[x] += t * src[x];
    }
  }
}

// out[y][x] = sum_k taps[k] * in[y + k - R][x] down a column.
inline void correlate_x2(std::span<const double> in, std::span<double> out, int h, int w,
                         std::span<const double> taps, Boundary b) {
  const int R = static_cast<int>(taps.size() / 2);
  for (int y = 0; y < h; ++y) {
    double* o = out.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) o[x] = 0.0;
    for (int k = 0; k < 2 * R + 1; ++k) {
      const double t = taps[k];
      if (t == 0.0) continue;
      int src = y + k - R;
      if (src < 0 || src >= h) {
        if (b == Boundary::Zero) continue;
        src = reflect_index(src, h);
      }
      const double* s = in.data() + static_cast<std::size_t>(src) * w;
      for (int x = 0; x < w; ++x) o[x] += t * s[x];
    }
  }
}

// Adjoint of correlate_x1: grad_in += A^T grad_out.
inline void correlate_x1_adjoint(std::span<const double> grad_out, std::span<double> grad_in,
                                 int h, int w, std::span<const double> taps, Boundary b) {
  const int R = static_cast<int>(taps.size() / 2);
  std::vector<double> buf(static_cast<std::size_t>(w + 2 * R));
  for (int y = 0; y < h; ++y) {
    std::fill(buf.begin(), buf.end(), 0.0);
    const double* g = grad_out.data() + static_cast<std::size_t>(y) * w;
    for (int k = 0; k < 2 * R + 1; ++k) {
      const double t = taps[k];
      if (t == 0.0) continue;
      double* dst = buf.data() + k;
      for (int x = 0; x < w; ++x) dst[x] += t * g[x];
    }
    double* gi = grad_in.data() + static_cast<std::size_t>(y) * w;
    for (int j = 0; j < w + 2 * R; ++j) {
      const int i = j - R;
      if (i >= 0 && i < w)
        gi[i] += buf[j];
      else if (b == Boundary::Mirror)
        gi[reflect_index(i, w)] += buf[j];
    }
  }
}

// Adjoint of correlate_x2.
inline void correlate_x2_adjoint(std::span<const double> grad_out, std::span<double> grad_in,
                                 int h, int w, std::span<const double> taps, Boundary b) {
  const int R = static_cast<int>(taps.size() / 2);
  for (int y = 0; y < h; ++y) {
    const double* g = grad_out.data() + static_cast<std::size_t>(y) * w;
    for (int k = 0; k < 2 * R + 1; ++k) {
      const double t = taps[k];
      if (t == 0.0) continue;
      int src = y + k - R;
      if (src < 0 || src >= h) {
        if (b == Boundary::Zero) continue;
        src = reflect_index(src, h);
      }
      double* d = grad_in.data() + static_cast<std::size_t>(src) * w;
      for (int x = 0; x < w; ++x) d[x] += t * g[x];
    }
  }
}

inline void correlate(Axis axis, std::span<const double> in, std::span<double> out, int h, int w,
                      std::span<const double> taps, Boundary b) {
  if (axis == Axis::X1)
    correlate_x1(in, out, h, w, taps, b);
  else
    correlate_x2(in, out, h, w, taps, b);
}

inline void correlate_adjoint(Axis axis, std::span<const double> g, std::span<double> gin, int h,
                              int w, std::span<const double> taps, Boundary b) {
  if (axis == Axis::X1)
    correlate_x1_adjoint(g, gin, h, w, taps, b);
  else
    correlate_x2_adjoint(g, gin, h, w, taps, b);
}

inline std::vector<double> convolve_taps(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

}  // namespace detail

/// Composed central-difference stencil of the given order, as correlation
/// taps centred on the middle element: (delta_xx)^j for order 2j and
/// delta_x (delta_xx)^j for order 2j+1. Order 0 is the identity.
inline std::vector<double> difference_stencil(int order) {
  if (order < 0) throw InvalidArgument("difference_stencil: negative order");
  std::vector<double> s{1.0};
  const std::vector<double> d2{1.0, -2.0, 1.0};
  for (int j = 0; j < order / 2; ++j) s = detail::convolve_taps(s, d2);
  if (order % 2 == 1) s = detail::convolve_taps(s, {-0.5, 0.0, 0.5});
  return s;
}

/// Separable smoothing with the discrete Gaussian along x1, then x2.
inline Tensor smooth_separable(const Tensor& input, double sigma, double epsilon) {
  if (!(sigma >= 0.0)) throw InvalidArgument("smooth_separable: sigma must be non-negative");
  auto kernel = KernelCache::instance().get(sigma, epsilon);
  Tensor out = Tensor::zeros_like(input);
  std::vector<double> tmp(static_cast<std::size_t>(input.plane_size()));
  for (int c = 0; c < input.channels(); ++c) {
    detail::correlate_x1(input.channel(c), tmp, input.height(), input.width(), kernel->taps,
                         input.boundary());
    detail::correlate_x2(tmp, out.channel(c), input.height(), input.width(), kernel->taps,
                         input.boundary());
  }
  return out;
}

/// Central-difference derivative of the given order along one axis.
inline Tensor central_diff(const Tensor& input, Axis axis, int order) {
  if (order < 1) throw InvalidArgument("central_diff: order must be at least 1");
  const std::vector<double> st = difference_stencil(order);
  Tensor out = Tensor::zeros_like(input);
  for (int c = 0; c < input.channels(); ++c)
    detail::correlate(axis, input.channel(c), out.channel(c), input.height(), input.width(), st,
                      input.boundary());
  return out;
}

}  // namespace gdres
