// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "gdres/error.hpp"
#include "gdres/tensor.hpp"

namespace gdres {

enum class BnMode { Train, Eval };

/// Per-channel batch normalisation with affine scale/shift.
struct BatchNormState {
  std::vector<double> scale;
  std::vector<double> shift;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;
  double momentum = 0.1;
  BnMode mode = BnMode::Eval;

  /// Unit scale, zero shift, running statistics (0, 1).
  static BatchNormState identity(int channels, double eps = 1e-5, double momentum = 0.1) {
    BatchNormState s;
    const auto n = static_cast<std::size_t>(channels);
    s.scale.assign(n, 1.0);
    s.shift.assign(n, 0.0);
    s.running_mean.assign(n, 0.0);
    s.running_var.assign(n, 1.0);
    s.eps = eps;
    s.momentum = momentum;
    return s;
  }

  int channels() const noexcept { return static_cast<int>(scale.size()); }
};

/// What the backward pass needs from one normalisation call.
struct BatchNormCache {
  BnMode mode = BnMode::Eval;
  std::vector<double> inv_std;
  std::vector<Tensor> normalized;  // x_hat per batch item
};

namespace detail {

inline void bn_check(const std::vector<Tensor>& batch, const BatchNormState& state) {
  if (batch.empty()) throw InvalidArgument("batch_norm: empty batch");
  if (!(state.eps > 0.0)) throw InvalidArgument("batch_norm: eps must be positive");
  for (const Tensor& t : batch)
    require_shape(t.channels() == state.channels(), "batch_norm: channel count mismatch");
}

}  // namespace detail

/// Per-channel statistics of one training batch (biased variance).
struct BatchStats {
  std::vector<double> mean;
  std::vector<double> var;
};

inline BatchStats batch_statistics(const std::vector<Tensor>& batch, int channels) {
  BatchStats st;
  st.mean.resize(static_cast<std::size_t>(channels));
  st.var.resize(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    double s = 0.0;
    std::size_t n = 0;
    for (const Tensor& t : batch) {
      for (double v : t.channel(c)) s += v;
      n += static_cast<std::size_t>(t.plane_size());
    }
    const double m = s / static_cast<double>(n);
    double q = 0.0;
    for (const Tensor& t : batch)
      for (double v : t.channel(c)) q += (v - m) * (v - m);
    st.mean[static_cast<std::size_t>(c)] = m;
    st.var[static_cast<std::size_t>(c)] = q / static_cast<double>(n);
  }
  return st;
}

/// Folds batch statistics into the running estimates with the state's momentum.
inline void update_running_stats(BatchNormState& state, const BatchStats& st) {
  for (std::size_t k = 0; k < state.scale.size(); ++k) {
    state.running_mean[k] = (1.0 - state.momentum) * state.running_mean[k] + state.momentum * st.mean[k];
    state.running_var[k] = (1.0 - state.momentum) * state.running_var[k] + state.momentum * st.var[k];
  }
}

/// Normalises `batch` in place without touching the state. In Train mode the
/// batch statistics are used and, if `stats` is given, returned there.
inline void batch_norm_apply(std::vector<Tensor>& batch, const BatchNormState& state,
                             BatchNormCache* cache, BatchStats* stats = nullptr) {
  detail::bn_check(batch, state);
  const int C = state.channels();
  BatchStats st;
  if (state.mode == BnMode::Train) {
    st = batch_statistics(batch, C);
  } else {
    st.mean = state.running_mean;
    st.var = state.running_var;
  }
  std::vector<double> inv_std(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c)
    inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(st.var[static_cast<std::size_t>(c)] + state.eps);
  if (cache) {
    cache->mode = state.mode;
    cache->inv_std = inv_std;
    cache->normalized.clear();
    cache->normalized.reserve(batch.size());
  }
  for (Tensor& t : batch) {
    for (int c = 0; c < C; ++c) {
      const auto k = static_cast<std::size_t>(c);
      for (double& v : t.channel(c)) v = (v - st.mean[k]) * inv_std[k];
    }
    if (cache) cache->normalized.push_back(t);
    for (int c = 0; c < C; ++c) {
      const auto k = static_cast<std::size_t>(c);
      const double g = state.scale[k], b = state.shift[k];
      for (double& v : t.channel(c)) v = g * v + b;
    }
  }
  if (stats) *stats = std::move(st);
}

/// Normalises `batch` in place.
///
/// Train mode uses statistics over (batch, height, width) and, when
/// `update_running` is set, folds them into the running estimates with the
/// state's momentum (biased variance, so a momentum-1 update reproduces the
/// batch statistics exactly). Eval mode uses the running statistics.
inline void batch_norm_inplace(std::vector<Tensor>& batch, BatchNormState& state,
                               BatchNormCache* cache, bool update_running = true) {
  BatchStats st;
  batch_norm_apply(batch, state, cache, &st);
  if (state.mode == BnMode::Train && update_running) update_running_stats(state, st);
}

/// Value-returning form of batch_norm_inplace.
inline std::vector<Tensor> batch_norm_forward(std::vector<Tensor> batch, BatchNormState& state) {
  batch_norm_inplace(batch, state, nullptr);
  return batch;
}

/// Backward through batch normalisation. `grad` holds dL/dy and is replaced
/// by dL/dx; dL/dscale and dL/dshift are accumulated.
inline void batch_norm_backward(std::vector<Tensor>& grad, const BatchNormState& state,
                                const BatchNormCache& cache, std::vector<double>& grad_scale,
                                std::vector<double>& grad_shift) {
  const int C = state.channels();
  detail::require_shape(grad.size() == cache.normalized.size(), "batch_norm_backward: batch mismatch");
  std::size_t n = 0;
  for (const Tensor& t : grad) n += static_cast<std::size_t>(t.plane_size());
  for (int c = 0; c < C; ++c) {
    const auto k = static_cast<std::size_t>(c);
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < grad.size(); ++b) {
      auto g = grad[b].channel(c);
      auto xh = cache.normalized[b].channel(c);
      for (std::size_t p = 0; p < g.size(); ++p) {
        sum_dy += g[p];
        sum_dy_xhat += g[p] * xh[p];
      }
    }
    grad_scale[k] += sum_dy_xhat;
    grad_shift[k] += sum_dy;
    const double gamma = state.scale[k];
    const double is = cache.inv_std[k];
    if (cache.mode == BnMode::Train) {
      const double mdy = sum_dy / static_cast<double>(n);
      const double mdyx = sum_dy_xhat / static_cast<double>(n);
      for (std::size_t b = 0; b < grad.size(); ++b) {
        auto g = grad[b].channel(c);
        auto xh = cache.normalized[b].channel(c);
        for (std::size_t p = 0; p < g.size(); ++p) g[p] = gamma * is * (g[p] - mdy - xh[p] * mdyx);
      }
    } else {
      for (Tensor& t : grad)
        for (double& v : t.channel(c)) v *= gamma * is;
    }
  }
}

}  // namespace gdres
