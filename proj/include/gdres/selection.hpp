// SPDX-License-Identifier: Apache-2.0
//
// Reduction of class maps to class scores (spatial selection) and of
// per-channel class scores to one vector (scale pooling).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "gdres/error.hpp"
#include "gdres/net_config.hpp"
#include "gdres/tensor.hpp"

namespace gdres {

/// Pixels (linear index within a plane) and weights that produced each
/// class score. Used to route gradients back into the class maps.
struct SelectionTrace {
  std::vector<std::vector<std::pair<int, double>>> taps;  // per class
};

namespace detail {

/// Central index set along one axis: one pixel for odd n, two for even n.
inline std::vector<int> central_positions(int n) {
  if (n % 2 == 1) return {n / 2};
  return {n / 2 - 1, n / 2};
}

}  // namespace detail

/// One score per channel of `maps`.
///
/// Centre reads the central pixel, averaging the two central rows and/or
/// columns when a size is even. SpatMax takes the global maximum of each
/// channel; ties resolve to the lowest linear index.
inline std::vector<double> spatial_select(const Tensor& maps, SpatialSelection method,
                                          SelectionTrace* trace = nullptr) {
  if (maps.size() == 0) throw InvalidArgument("spatial_select: empty map");
  const int C = maps.channels();
  std::vector<double> out(static_cast<std::size_t>(C));
  if (trace) trace->taps.assign(static_cast<std::size_t>(C), {});
  if (method == SpatialSelection::Centre) {
    const auto ys = detail::central_positions(maps.height());
    const auto xs = detail::central_positions(maps.width());
    const double w = 1.0 / static_cast<double>(ys.size() * xs.size());
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int y : ys)
        for (int x : xs) {
          s += maps.at(c, y, x);
          if (trace) trace->taps[static_cast<std::size_t>(c)].emplace_back(y * maps.width() + x, w);
        }
      out[static_cast<std::size_t>(c)] = s * w;
    }
  } else {
    for (int c = 0; c < C; ++c) {
      const auto plane = maps.channel(c);
      const auto it = std::max_element(plane.begin(), plane.end());
      out[static_cast<std::size_t>(c)] = *it;
      if (trace)
        trace->taps[static_cast<std::size_t>(c)].emplace_back(static_cast<int>(it - plane.begin()), 1.0);
    }
  }
  return out;
}

/// Scatters class-score gradients into a map gradient shaped like the
/// selected maps.
inline void spatial_select_backward(const SelectionTrace& trace, const std::vector<double>& grad_scores,
                                    Tensor& grad_maps) {
  detail::require_shape(trace.taps.size() == grad_scores.size() &&
                            static_cast<int>(grad_scores.size()) == grad_maps.channels(),
                        "spatial_select_backward: class count mismatch");
  for (std::size_t c = 0; c < grad_scores.size(); ++c) {
    auto plane = grad_maps.channel(static_cast<int>(c));
    for (const auto& [idx, w] : trace.taps[c]) plane[static_cast<std::size_t>(idx)] += w * grad_scores[c];
  }
}

namespace detail {

inline void check_pool_input(const std::vector<std::vector<double>>& ch) {
  if (ch.empty()) throw InvalidArgument("scale_pool: no channels");
  for (const auto& v : ch)
    require_shape(v.size() == ch.front().size(), "scale_pool: channel vectors differ in length");
}

/// Sum in ascending order so the result does not depend on channel order.
inline double ordered_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace detail

/// Element-wise max, log-sum-exp or mean across channels.
inline std::vector<double> scale_pool(const std::vector<std::vector<double>>& channel_outputs,
                                      ScalePooling method) {
  detail::check_pool_input(channel_outputs);
  const std::size_t K = channel_outputs.front().size();
  const std::size_t N = channel_outputs.size();
  std::vector<double> out(K);
  std::vector<double> col(N);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t n = 0; n < N; ++n) col[n] = channel_outputs[n][k];
    const double m = *std::max_element(col.begin(), col.end());
    switch (method) {
      case ScalePooling::Max:
        out[k] = m;
        break;
      case ScalePooling::LogSumExp: {
        std::vector<double> e(N);
        for (std::size_t n = 0; n < N; ++n) e[n] = std::exp(col[n] - m);
        out[k] = m + std::log(detail::ordered_sum(std::move(e)));
        break;
      }
      case ScalePooling::Average:
        out[k] = detail::ordered_sum(col) / static_cast<double>(N);
        break;
    }
  }
  return out;
}

/// Gradient of scale_pool with respect to every channel vector. Max routes
/// to the first winning channel, log-sum-exp by softmax weight, average
/// uniformly.
inline std::vector<std::vector<double>> scale_pool_backward(
    const std::vector<std::vector<double>>& channel_outputs, ScalePooling method,
    const std::vector<double>& grad_pooled) {
  detail::check_pool_input(channel_outputs);
  const std::size_t K = channel_outputs.front().size();
  const std::size_t N = channel_outputs.size();
  detail::require_shape(grad_pooled.size() == K, "scale_pool_backward: gradient length mismatch");
  std::vector<std::vector<double>> g(N, std::vector<double>(K, 0.0));
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t arg = 0;
    for (std::size_t n = 1; n < N; ++n)
      if (channel_outputs[n][k] > channel_outputs[arg][k]) arg = n;
    const double m = channel_outputs[arg][k];
    switch (method) {
      case ScalePooling::Max:
        g[arg][k] = grad_pooled[k];
        break;
      case ScalePooling::LogSumExp: {
        double z = 0.0;
        for (std::size_t n = 0; n < N; ++n) z += std::exp(channel_outputs[n][k] - m);
        for (std::size_t n = 0; n < N; ++n)
          g[n][k] = grad_pooled[k] * std::exp(channel_outputs[n][k] - m) / z;
        break;
      }
      case ScalePooling::Average:
        for (std::size_t n = 0; n < N; ++n) g[n][k] = grad_pooled[k] / static_cast<double>(N);
        break;
    }
  }
  return g;
}

/// Index of the largest entry; the lowest index wins ties.
inline int argmax(const std::vector<double>& v) {
  if (v.empty()) throw InvalidArgument("argmax: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

}  // namespace gdres
