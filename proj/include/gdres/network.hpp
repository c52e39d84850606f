// SPDX-License-Identifier: Apache-2.0
//
// Single-item entry points: residual blocks, scale channels and the
// multi-scale-channel classifier.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gdres/error.hpp"
#include "gdres/forward.hpp"
#include "gdres/selection.hpp"

namespace gdres {

/// ReLU(skip(x) + BN(J2(ReLU(BN(J1(x)))))) with both jet layers at sigma_k.
/// Batch norms run in their stored mode; running statistics are untouched.
inline Tensor residual_block_forward(const Tensor& input, const BlockConfig& block, const BlockParams& params,
                                     const ArchConfig& arch, double sigma_k) {
  detail::require_shape(input.channels() == block.width_in, "residual_block_forward: input width mismatch");
  JetSpec spec;
  spec.max_order = arch.jet_order;
  spec.include_zero_order = block.include_zero_order;
  spec.sigma = sigma_k;
  spec.epsilon = arch.epsilon;
  std::vector<Tensor> y{detail::jet_apply(input, params.conv1, spec, nullptr)};
  detail::bn_step(y, params.bn1, nullptr, false);
  detail::relu_inplace(y[0]);
  y[0] = detail::jet_apply(y[0], params.conv2, spec, nullptr);
  detail::bn_step(y, params.bn2, nullptr, false);
  if (params.projection) {
    std::vector<Tensor> s{detail::project(input, *params.projection)};
    detail::bn_step(s, params.projection->bn, nullptr, false);
    y[0] += s[0];
  } else {
    detail::require_shape(block.width_out == block.width_in, "residual_block_forward: missing projection");
    y[0] += input;
  }
  detail::relu_inplace(y[0]);
  return y[0];
}

/// Class maps of one scale channel; same spatial size as `image`.
inline Tensor scale_channel_forward(const Tensor& image, const ScaleChannelConfig& cfg,
                                    const NetworkParams& params) {
  return forward_batch(std::vector<Tensor>{image}, std::vector<double>{cfg.sigma0}, cfg.arch, params)[0];
}

struct Prediction {
  std::vector<double> scores;                     // pooled class scores
  int label = 0;                                  // argmax, lowest index on ties
  std::vector<std::vector<double>> per_channel;   // class scores per scale channel
  std::vector<Tensor> class_maps;                 // per scale channel
};

/// Runs every scale channel with the shared parameters, selects spatially,
/// pools over scales and takes the argmax.
inline Prediction multi_channel_predict(const Tensor& image, const MultiNetConfig& cfg,
                                        const NetworkParams& params, bool keep_maps = false) {
  cfg.validate();
  std::vector<Tensor> items(cfg.channel_sigmas.size(), image);
  auto maps = forward_batch(items, cfg.channel_sigmas, cfg.arch, params);
  Prediction p;
  for (const Tensor& m : maps) p.per_channel.push_back(spatial_select(m, cfg.arch.selection));
  p.scores = scale_pool(p.per_channel, cfg.pooling);
  p.label = argmax(p.scores);
  if (keep_maps) p.class_maps = std::move(maps);
  return p;
}

/// True when every coarse channel scale occurs in the dense set (relative
/// tolerance 1e-9).
inline bool is_refinement(const std::vector<double>& coarse, const std::vector<double>& dense) {
  return std::all_of(coarse.begin(), coarse.end(), [&](double s) {
    return std::any_of(dense.begin(), dense.end(), [&](double d) { return std::abs(d - s) <= 1e-9 * s; });
  });
}

/// Inference over a denser set of scale channels with unchanged weights.
class DensifiedNet {
 public:
  DensifiedNet(const NetworkParams& params, const MultiNetConfig& coarse, const MultiNetConfig& dense)
      : params_(&params), cfg_(dense) {
    coarse.validate();
    dense.validate();
    if (!is_refinement(coarse.channel_sigmas, dense.channel_sigmas))
      throw InvalidArgument("densify_channels: dense scale set does not refine the coarse set");
    if (coarse.arch.widths != dense.arch.widths || coarse.arch.jet_order != dense.arch.jet_order)
      throw InvalidArgument("densify_channels: architectures differ");
  }

  const MultiNetConfig& config() const noexcept { return cfg_; }
  Prediction predict(const Tensor& image) const { return multi_channel_predict(image, cfg_, *params_); }

 private:
  const NetworkParams* params_;
  MultiNetConfig cfg_;
};

inline DensifiedNet densify_channels(const NetworkParams& params, const MultiNetConfig& coarse,
                                     const MultiNetConfig& dense) {
  return DensifiedNet(params, coarse, dense);
}

/// Dense configuration with ratio lambda^(1/subdivide) covering the coarse
/// range, optionally extended by `extra_top` channels above it.
inline MultiNetConfig refine_channels(const MultiNetConfig& coarse, int subdivide, int extra_top = 0) {
  if (subdivide < 1) throw InvalidArgument("refine_channels: subdivide must be positive");
  MultiNetConfig d = coarse;
  d.lambda = std::pow(coarse.lambda, 1.0 / subdivide);
  const int n = (coarse.num_channels() - 1) * subdivide + 1 + extra_top;
  d.channel_sigmas.clear();
  for (int i = 0; i < n; ++i) {
    const int q = i / subdivide, r = i % subdivide;
    // Coarse members are copied exactly so the refinement check is exact.
    if (r == 0 && q < coarse.num_channels())
      d.channel_sigmas.push_back(coarse.channel_sigmas[static_cast<std::size_t>(q)]);
    else
      d.channel_sigmas.push_back(coarse.channel_sigmas.front() * std::pow(d.lambda, i));
  }
  return d;
}

}  // namespace gdres
