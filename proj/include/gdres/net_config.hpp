// SPDX-License-Identifier: Apache-2.0
//
// Architecture descriptions for single- and multi-scale-channel networks.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gdres/error.hpp"
#include "gdres/jet.hpp"
#include "gdres/tensor.hpp"

namespace gdres {

enum class SpatialSelection { Centre, SpatMax };
enum class ScalePooling { Max, LogSumExp, Average };

inline std::string to_string(SpatialSelection s) {
  return s == SpatialSelection::Centre ? "centre" : "spatmax";
}
inline std::string to_string(ScalePooling p) {
  switch (p) {
    case ScalePooling::Max: return "max";
    case ScalePooling::LogSumExp: return "logsumexp";
    case ScalePooling::Average: return "average";
  }
  return "?";
}

/// Effective layer number k = floor(kappa / 2) + 1 of the kappa-th layer.
/// Both layers of a residual block share one k.
inline int effective_layer_index(int kappa, int num_layers) {
  if (kappa < 1 || kappa > num_layers)
    throw InvalidArgument("effective_layer_index: layer " + std::to_string(kappa) +
                          " outside 1.." + std::to_string(num_layers));
  return kappa / 2 + 1;
}

/// sigma_k = r^(k-1) sigma_0.
inline double layer_scale(int k, double sigma0, double ratio) {
  if (k < 1) throw InvalidArgument("layer_scale: k must be at least 1");
  return std::pow(ratio, k - 1) * sigma0;
}

/// Geometric initial scales lambda^(n-1) sigma_base for n = 1..count.
inline std::vector<double> channel_initial_scales(double sigma_base, double lambda, int count) {
  if (count < 1) throw InvalidArgument("channel_initial_scales: count must be at least 1");
  if (!(lambda > 1.0)) throw InvalidArgument("channel_initial_scales: lambda must exceed 1");
  std::vector<double> out;
  for (int n = 0; n < count; ++n) out.push_back(std::pow(lambda, n) * sigma_base);
  return out;
}

struct BlockConfig {
  int effective_index = 2;
  int width_in = 0;
  int width_mid = 0;
  int width_out = 0;
  bool uses_projection = false;
  bool depthwise = false;
  bool include_zero_order = false;
};

/// Shared architecture of one scale channel (everything except sigma_0).
struct ArchConfig {
  /// Input channels, output width of effective layers 1..Z-1, class count.
  std::vector<int> widths{1, 8, 8, 4};
  int jet_order = 2;
  /// Adds the (0,0) term to every layer after the first.
  bool zero_order_higher = false;
  /// Number of trailing residual blocks built from depthwise-separable layers.
  int depthwise_blocks = 0;
  double ratio = 1.2;
  double epsilon = 0.005;
  SpatialSelection selection = SpatialSelection::Centre;
  Boundary boundary = Boundary::Mirror;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  int effective_layers() const { return static_cast<int>(widths.size()) - 1; }
  int num_layers() const { return 2 * (effective_layers() - 1); }
  int num_blocks() const { return effective_layers() - 2; }
  int input_channels() const { return widths.front(); }
  int num_classes() const { return widths.back(); }

  void validate() const {
    if (widths.size() < 3)
      throw InvalidArgument("ArchConfig: need at least input, one hidden width and classes");
    for (int w : widths)
      if (w < 1) throw InvalidArgument("ArchConfig: widths must be positive");
    if (jet_order < 1 || jet_order > 3) throw InvalidArgument("ArchConfig: jet order must be 1..3");
    if (!(ratio > 1.0)) throw InvalidArgument("ArchConfig: relative scale ratio must exceed 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("ArchConfig: epsilon must lie in (0,1)");
    if (depthwise_blocks < 0 || depthwise_blocks > num_blocks())
      throw InvalidArgument("ArchConfig: depthwise_blocks out of range");
  }

  BlockConfig block(int k) const {
    if (k < 2 || k > effective_layers() - 1) throw InvalidArgument("ArchConfig: no block at k=" + std::to_string(k));
    BlockConfig b;
    b.effective_index = k;
    b.width_in = widths[static_cast<std::size_t>(k - 1)];
    b.width_mid = b.width_in;
    b.width_out = widths[static_cast<std::size_t>(k)];
    b.uses_projection = b.width_in != b.width_out;
    b.depthwise = k > effective_layers() - 1 - depthwise_blocks;
    b.include_zero_order = zero_order_higher;
    return b;
  }

  std::vector<BlockConfig> blocks() const {
    std::vector<BlockConfig> out;
    for (int k = 2; k <= effective_layers() - 1; ++k) out.push_back(block(k));
    return out;
  }

  /// Jet spec of effective layer k for a channel with initial scale sigma0.
  JetSpec spec(int k, double sigma0) const {
    JetSpec s;
    s.max_order = jet_order;
    s.include_zero_order = k > 1 && zero_order_higher;
    s.sigma = layer_scale(k, sigma0, ratio);
    s.epsilon = epsilon;
    return s;
  }

  int num_indices(int k) const { return spec(k, 1.0).num_indices(); }
};

struct ScaleChannelConfig {
  ArchConfig arch;
  double sigma0 = 1.0;
};

struct MultiNetConfig {
  ArchConfig arch;
  std::vector<double> channel_sigmas{1.0};
  double lambda = std::sqrt(2.0);
  ScalePooling pooling = ScalePooling::Max;

  int num_classes() const { return arch.num_classes(); }
  int num_channels() const { return static_cast<int>(channel_sigmas.size()); }

  /// Channel scales must increase with a constant ratio lambda.
  void validate() const {
    arch.validate();
    if (channel_sigmas.empty()) throw InvalidArgument("MultiNetConfig: no scale channels");
    for (double s : channel_sigmas)
      if (!(s > 0.0)) throw InvalidArgument("MultiNetConfig: channel scales must be positive");
    for (std::size_t i = 1; i < channel_sigmas.size(); ++i) {
      if (!(channel_sigmas[i] > channel_sigmas[i - 1]))
        throw InvalidArgument("MultiNetConfig: channel scales must be strictly increasing");
      const double ratio = channel_sigmas[i] / channel_sigmas[i - 1];
      if (std::abs(ratio - lambda) > 1e-12 * lambda)
        throw InvalidArgument("MultiNetConfig: adjacent channel ratio differs from lambda");
    }
  }

  ScaleChannelConfig channel(int i) const { return {arch, channel_sigmas.at(static_cast<std::size_t>(i))}; }
};

}  // namespace gdres
