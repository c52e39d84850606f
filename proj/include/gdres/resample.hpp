// SPDX-License-Identifier: Apache-2.0
//
// Bicubic resampling and mirror extension.
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "gdres/error.hpp"
#include "gdres/filtering.hpp"
#include "gdres/tensor.hpp"

namespace gdres {

/// Catmull-Rom cubic (a = -0.5).
inline double cubic_kernel(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

namespace detail {

/// Index that mirrors about the edge while repeating the edge sample
/// (... b a [a b c] c b ...).
inline int symmetric_index(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

struct ResampleWeights {
  std::vector<std::vector<int>> index;
  std::vector<std::vector<double>> weight;
};

/// Weights mapping n_in samples to n_out samples. Output sample j sits at
/// input coordinate (j + 0.5) / scale - 0.5. Downscaling widens the kernel
/// by 1 / scale; weights are normalised to sum to one.
inline ResampleWeights resample_weights(int n_in, int n_out, double scale) {
  ResampleWeights rw;
  const double widen = scale < 1.0 ? 1.0 / scale : 1.0;
  const double support = 2.0 * widen;
  rw.index.resize(static_cast<std::size_t>(n_out));
  rw.weight.resize(static_cast<std::size_t>(n_out));
  for (int j = 0; j < n_out; ++j) {
    const double u = (j + 0.5) / scale - 0.5;
    const int lo = static_cast<int>(std::floor(u - support)) + 1;
    const int hi = static_cast<int>(std::ceil(u + support)) - 1;
    double sum = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double w = cubic_kernel((u - i) / widen);
      if (w == 0.0) continue;
      rw.index[static_cast<std::size_t>(j)].push_back(symmetric_index(i, n_in));
      rw.weight[static_cast<std::size_t>(j)].push_back(w);
      sum += w;
    }
    for (double& w : rw.weight[static_cast<std::size_t>(j)]) w /= sum;
  }
  return rw;
}

}  // namespace detail

/// Separable bicubic resize to round(size * scale) per axis.
inline Tensor bicubic_resize(const Tensor& image, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("bicubic_resize: scale must be positive");
  const int h = image.height(), w = image.width();
  const int oh = static_cast<int>(std::lround(h * scale));
  const int ow = static_cast<int>(std::lround(w * scale));
  if (oh < 1 || ow < 1) throw InvalidArgument("bicubic_resize: output would be empty");
  const auto wx = detail::resample_weights(w, ow, scale);
  const auto wy = detail::resample_weights(h, oh, scale);
  Tensor out(oh, ow, image.channels(), image.boundary());
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int c = 0; c < image.channels(); ++c) {
    const auto src = image.channel(c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        const auto& idx = wx.index[static_cast<std::size_t>(x)];
        const auto& wt = wx.weight[static_cast<std::size_t>(x)];
        for (std::size_t k = 0; k < idx.size(); ++k) s += wt[k] * src[static_cast<std::size_t>(y) * w + idx[k]];
        tmp[static_cast<std::size_t>(y) * ow + x] = s;
      }
    auto dst = out.channel(c);
    for (int y = 0; y < oh; ++y) {
      const auto& idx = wy.index[static_cast<std::size_t>(y)];
      const auto& wt = wy.weight[static_cast<std::size_t>(y)];
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (std::size_t k = 0; k < idx.size(); ++k) s += wt[k] * tmp[static_cast<std::size_t>(idx[k]) * ow + x];
        dst[static_cast<std::size_t>(y) * ow + x] = s;
      }
    }
  }
  return out;
}

/// Margins (before, after) for centring n inside target; the odd pixel goes
/// after (bottom or right).
inline std::pair<int, int> centre_margins(int n, int target) {
  const int total = target - n;
  return {total / 2, total - total / 2};
}

/// Places `image` at the centre of a target_h x target_w canvas and fills the
/// border by edge-exclusive reflection.
inline Tensor mirror_extend(const Tensor& image, int target_h, int target_w) {
  if (target_h < image.height() || target_w < image.width())
    throw InvalidArgument("mirror_extend: target smaller than image");
  const int top = centre_margins(image.height(), target_h).first;
  const int left = centre_margins(image.width(), target_w).first;
  Tensor out(target_h, target_w, image.channels(), image.boundary());
  for (int c = 0; c < image.channels(); ++c)
    for (int y = 0; y < target_h; ++y) {
      const int sy = detail::reflect_index(y - top, image.height());
      for (int x = 0; x < target_w; ++x)
        out.at(c, y, x) = image.at(c, sy, detail::reflect_index(x - left, image.width()));
    }
  return out;
}

/// Central h x w window, placed as mirror_extend places an image of that
/// size.
inline Tensor centre_crop(const Tensor& image, int h, int w) {
  if (h > image.height() || w > image.width() || h < 1 || w < 1)
    throw InvalidArgument("centre_crop: window does not fit");
  const int top = centre_margins(h, image.height()).first;
  const int left = centre_margins(w, image.width()).first;
  Tensor out(h, w, image.channels(), image.boundary());
  for (int c = 0; c < image.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, y + top, x + left);
  return out;
}

}  // namespace gdres
