// SPDX-License-Identifier: Apache-2.0
//
// Learnable state of a network. One parameter set is shared by all scale
// channels.
#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gdres/batchnorm.hpp"
#include "gdres/jet.hpp"
#include "gdres/net_config.hpp"
#include "gdres/rng.hpp"

namespace gdres {

using JetWeights = std::variant<JetLayerWeights, DepthSepWeights>;

/// 1x1 mixing on the skip path of a block whose width changes, followed by
/// batch normalisation.
struct ProjectionParams {
  int out_channels = 0;
  int in_channels = 0;
  std::vector<double> weights;  // [out][in]
  BatchNormState bn;
};

struct BlockParams {
  JetWeights conv1;
  BatchNormState bn1;
  JetWeights conv2;
  BatchNormState bn2;
  std::optional<ProjectionParams> projection;
};

struct NetworkParams {
  JetWeights first;
  BatchNormState first_bn;
  std::vector<BlockParams> blocks;
  JetWeights last;  // carries the class bias
};

enum class ParamFamily { JetCoeff, DepthCoeff, PointWeight, BnScale, BnShift, Projection, Bias };

inline std::string to_string(ParamFamily f) {
  switch (f) {
    case ParamFamily::JetCoeff: return "jet_coeff";
    case ParamFamily::DepthCoeff: return "depth_coeff";
    case ParamFamily::PointWeight: return "point_weight";
    case ParamFamily::BnScale: return "bn_scale";
    case ParamFamily::BnShift: return "bn_shift";
    case ParamFamily::Projection: return "projection";
    case ParamFamily::Bias: return "bias";
  }
  return "?";
}

namespace detail {

inline JetWeights zero_jet(int out, int in, int num_indices, bool depthwise, bool with_bias) {
  if (depthwise) return DepthSepWeights::zeros(out, in, num_indices, with_bias);
  return JetLayerWeights::zeros(out, in, num_indices, with_bias);
}

template <typename P, typename F>
void visit_jet(P& w, F&& f) {
  std::visit(
      [&](auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, JetLayerWeights>) {
          f(ParamFamily::JetCoeff, std::span(v.coeffs));
        } else {
          f(ParamFamily::DepthCoeff, std::span(v.depth_coeffs));
          f(ParamFamily::PointWeight, std::span(v.point_weights));
        }
        if (!v.bias.empty()) f(ParamFamily::Bias, std::span(v.bias));
      },
      w);
}

template <typename B, typename F>
void visit_bn(B& bn, F&& f) {
  f(ParamFamily::BnScale, std::span(bn.scale));
  f(ParamFamily::BnShift, std::span(bn.shift));
}

}  // namespace detail

/// Parameters with every weight zero and every batch norm at identity.
inline NetworkParams zero_params(const ArchConfig& arch) {
  arch.validate();
  NetworkParams p;
  const int Z = arch.effective_layers();
  p.first = detail::zero_jet(arch.widths[1], arch.widths[0], arch.num_indices(1), false, false);
  p.first_bn = BatchNormState::identity(arch.widths[1], arch.bn_eps, arch.bn_momentum);
  for (const BlockConfig& b : arch.blocks()) {
    BlockParams bp;
    const int A = arch.num_indices(b.effective_index);
    bp.conv1 = detail::zero_jet(b.width_mid, b.width_in, A, b.depthwise, false);
    bp.bn1 = BatchNormState::identity(b.width_mid, arch.bn_eps, arch.bn_momentum);
    bp.conv2 = detail::zero_jet(b.width_out, b.width_mid, A, b.depthwise, false);
    bp.bn2 = BatchNormState::identity(b.width_out, arch.bn_eps, arch.bn_momentum);
    if (b.uses_projection) {
      ProjectionParams pr;
      pr.out_channels = b.width_out;
      pr.in_channels = b.width_in;
      pr.weights.assign(static_cast<std::size_t>(b.width_out) * b.width_in, 0.0);
      pr.bn = BatchNormState::identity(b.width_out, arch.bn_eps, arch.bn_momentum);
      bp.projection = std::move(pr);
    }
    p.blocks.push_back(std::move(bp));
  }
  p.last = detail::zero_jet(arch.num_classes(), arch.widths[static_cast<std::size_t>(Z - 1)],
                            arch.num_indices(Z), false, true);
  return p;
}

/// Calls f(family, span) for every learnable array in a fixed order.
/// Running batch-norm statistics are not learnable and are skipped.
template <typename P, typename F>
  requires std::is_same_v<std::remove_const_t<P>, NetworkParams>
void visit_parameters(P& p, F&& f) {
  detail::visit_jet(p.first, f);
  detail::visit_bn(p.first_bn, f);
  for (auto& b : p.blocks) {
    detail::visit_jet(b.conv1, f);
    detail::visit_bn(b.bn1, f);
    detail::visit_jet(b.conv2, f);
    detail::visit_bn(b.bn2, f);
    if (b.projection) {
      f(ParamFamily::Projection, std::span(b.projection->weights));
      detail::visit_bn(b.projection->bn, f);
    }
  }
  detail::visit_jet(p.last, f);
}

inline std::size_t parameter_count(const NetworkParams& p) {
  std::size_t n = 0;
  visit_parameters(p, [&](ParamFamily, auto s) { n += s.size(); });
  return n;
}

/// Parameters shaped like `p` with all learnable values zero.
inline NetworkParams zeros_like(const NetworkParams& p) {
  NetworkParams g = p;
  visit_parameters(g, [](ParamFamily, std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
  return g;
}

inline void set_bn_mode(NetworkParams& p, BnMode mode) {
  p.first_bn.mode = mode;
  for (auto& b : p.blocks) {
    b.bn1.mode = mode;
    b.bn2.mode = mode;
    if (b.projection) b.projection->bn.mode = mode;
  }
}

/// Uniform He initialisation, U(-sqrt(6/fan_in), sqrt(6/fan_in)).
///
/// For a standard jet layer the fan-in is (number of jet indices) * c_in;
/// depthwise coefficients use the index count alone and pointwise weights
/// use c_in. Biases start at zero, batch norms at identity.
inline void he_uniform_init(NetworkParams& p, Rng& rng) {
  auto fill = [&](std::vector<double>& v, int fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& x : v) x = rng.uniform(-bound, bound);
  };
  auto init_jet = [&](JetWeights& w) {
    std::visit(
        [&](auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, JetLayerWeights>) {
            fill(v.coeffs, v.num_indices * v.in_channels);
          } else {
            fill(v.depth_coeffs, v.num_indices);
            fill(v.point_weights, v.in_channels);
          }
          std::fill(v.bias.begin(), v.bias.end(), 0.0);
        },
        w);
  };
  init_jet(p.first);
  for (auto& b : p.blocks) {
    init_jet(b.conv1);
    init_jet(b.conv2);
    if (b.projection) fill(b.projection->weights, b.projection->in_channels);
  }
  init_jet(p.last);
}

}  // namespace gdres
