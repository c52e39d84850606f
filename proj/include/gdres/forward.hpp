// SPDX-License-Identifier: Apache-2.0
//
// Batched evaluation of the convolutional stage and its reverse pass.
//
// A batch is a list of items, each an input image paired with the initial
// scale of the channel it runs through. Batch normalisation in Train mode
// pools statistics over every item, so a batch of B samples through N scale
// channels normalises over B * N items.
#pragma once

#include <cstddef>
#include <type_traits>
#include <variant>
#include <vector>

#include "gdres/batchnorm.hpp"
#include "gdres/error.hpp"
#include "gdres/jet.hpp"
#include "gdres/net_config.hpp"
#include "gdres/params.hpp"
#include "gdres/tensor.hpp"

namespace gdres {

struct JetTrace {
  std::vector<Tensor> basis;  // per item
  std::vector<Tensor> hmap;   // depthwise-separable layers only
};

struct BlockTrace {
  JetTrace conv1;
  BatchNormCache bn1;
  std::vector<Tensor> act1;  // after the inner ReLU
  JetTrace conv2;
  BatchNormCache bn2;
  BatchNormCache proj_bn;
  std::vector<Tensor> out;  // block output after ReLU
};

/// Activations recorded by forward_batch. Replaying it with
/// backward_batch consumes it.
struct GradTape {
  std::vector<double> sigma0;
  int height = 0;
  int width = 0;
  JetTrace first;
  BatchNormCache first_bn;
  std::vector<Tensor> first_out;
  std::vector<BlockTrace> blocks;
  JetTrace last;
  std::vector<Tensor> class_maps;
  bool consumed = false;
};

namespace detail {

inline void relu_inplace(Tensor& t) {
  for (double& v : t.data()) v = v > 0.0 ? v : 0.0;
}

/// g *= [y > 0] for the post-ReLU activation y.
inline void relu_gate(Tensor& g, const Tensor& y) {
  auto gd = g.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < gd.size(); ++i)
    if (!(yd[i] > 0.0)) gd[i] = 0.0;
}

inline int jet_in_channels(const JetWeights& w) {
  return std::visit([](const auto& v) { return v.in_channels; }, w);
}
inline int jet_num_indices(const JetWeights& w) {
  return std::visit([](const auto& v) { return v.num_indices; }, w);
}

inline Tensor jet_apply(const Tensor& in, const JetWeights& w, const JetSpec& spec, JetTrace* tr) {
  check_layer(in, jet_in_channels(w), jet_num_indices(w), spec);
  Tensor basis = jet_basis(in, spec);
  Tensor out = std::visit(
      [&](const auto& v) -> Tensor {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, JetLayerWeights>) {
          return combine_standard(basis, v);
        } else {
          Tensor h = depthwise_responses(basis, v);
          Tensor o = pointwise_mix(h, v);
          if (tr) tr->hmap.push_back(std::move(h));
          return o;
        }
      },
      w);
  require_shape(out.height() == in.height() && out.width() == in.width(),
                "jet layer changed the spatial size");
  if (tr) tr->basis.push_back(std::move(basis));
  return out;
}

/// Reverse of jet_apply for one item. Parameter gradients accumulate into
/// `gw`; the input gradient is returned when requested.
inline Tensor jet_backward(const Tensor& g_out, const JetWeights& w, JetWeights& gw, const JetTrace& tr,
                           std::size_t item, const JetSpec& spec, bool want_input) {
  const Tensor& basis = tr.basis[item];
  const int P = g_out.plane_size();
  Tensor g_basis(g_out.height(), g_out.width(), basis.channels(), g_out.boundary());
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        auto& gv = std::get<T>(gw);
        if constexpr (std::is_same_v<T, JetLayerWeights>) {
          const int J = v.in_channels * v.num_indices;
          for (int o = 0; o < v.out_channels; ++o) {
            const auto go = g_out.channel(o);
            if (!gv.bias.empty()) {
              double s = 0.0;
              for (double x : go) s += x;
              gv.bias[static_cast<std::size_t>(o)] += s;
            }
            const std::size_t row = static_cast<std::size_t>(o) * J;
            for (int j = 0; j < J; ++j) {
              gv.coeffs[row + j] += dot(go, basis.channel(j));
              if (want_input && v.coeffs[row + j] != 0.0) axpy(v.coeffs[row + j], go, g_basis.channel(j));
            }
          }
        } else {
          const Tensor& h = tr.hmap[item];
          const int A = v.num_indices;
          std::vector<double> gh(static_cast<std::size_t>(P));
          for (int o = 0; o < v.out_channels; ++o) {
            if (!gv.bias.empty()) {
              double s = 0.0;
              for (double x : g_out.channel(o)) s += x;
              gv.bias[static_cast<std::size_t>(o)] += s;
            }
          }
          for (int i = 0; i < v.in_channels; ++i) {
            std::fill(gh.begin(), gh.end(), 0.0);
            for (int o = 0; o < v.out_channels; ++o) {
              gv.point(o, i) += dot(g_out.channel(o), h.channel(i));
              if (v.point(o, i) != 0.0) axpy(v.point(o, i), g_out.channel(o), gh);
            }
            for (int a = 0; a < A; ++a) {
              gv.depth(i, a) += dot(gh, basis.channel(i * A + a));
              if (want_input) axpy(v.depth(i, a), gh, g_basis.channel(i * A + a));
            }
          }
        }
      },
      w);
  if (!want_input) return {};
  Tensor g_in(g_out.height(), g_out.width(), jet_in_channels(w), g_out.boundary());
  jet_basis_backward(g_basis, spec, g_in);
  return g_in;
}

/// out[o] = sum_i W[o][i] in[i].
inline Tensor project(const Tensor& in, const ProjectionParams& p) {
  require_shape(in.channels() == p.in_channels, "projection: channel mismatch");
  Tensor out(in.height(), in.width(), p.out_channels, in.boundary());
  for (int o = 0; o < p.out_channels; ++o)
    for (int i = 0; i < p.in_channels; ++i)
      axpy(p.weights[static_cast<std::size_t>(o) * p.in_channels + i], in.channel(i), out.channel(o));
  return out;
}

template <typename State>
void bn_step(std::vector<Tensor>& x, State& state, BatchNormCache* cache, bool update_running) {
  BatchStats st;
  batch_norm_apply(x, state, cache, &st);
  if constexpr (!std::is_const_v<State>) {
    if (update_running && state.mode == BnMode::Train) update_running_stats(state, st);
  }
}

}  // namespace detail

/// Runs the convolutional stage (first layer, residual blocks, last layer)
/// on every item and returns the class maps after the final ReLU.
///
/// With non-const `params` in Train mode the running batch-norm statistics
/// are updated once per call. A const parameter set is never modified.
template <typename P>
  requires std::is_same_v<std::remove_const_t<P>, NetworkParams>
std::vector<Tensor> forward_batch(const std::vector<Tensor>& inputs, const std::vector<double>& sigma0,
                                  const ArchConfig& arch, P& params, GradTape* tape = nullptr,
                                  bool update_running = true) {
  arch.validate();
  if (inputs.empty()) throw InvalidArgument("forward_batch: empty batch");
  detail::require_shape(inputs.size() == sigma0.size(), "forward_batch: one initial scale per item");
  detail::require_shape(params.blocks.size() == static_cast<std::size_t>(arch.num_blocks()),
                        "forward_batch: parameters do not match the architecture");
  const std::size_t B = inputs.size();
  const int Z = arch.effective_layers();
  const int H = inputs.front().height(), W = inputs.front().width();
  for (const Tensor& t : inputs) {
    detail::require_shape(t.height() == H && t.width() == W, "forward_batch: items differ in size");
    detail::require_shape(t.channels() == arch.input_channels(), "forward_batch: wrong input channel count");
  }
  if (tape) {
    *tape = GradTape{};
    tape->sigma0 = sigma0;
    tape->height = H;
    tape->width = W;
    tape->blocks.resize(params.blocks.size());
  }

  std::vector<Tensor> x(B);
  for (std::size_t b = 0; b < B; ++b) {
    Tensor in = inputs[b];
    in.set_boundary(arch.boundary);
    x[b] = detail::jet_apply(in, params.first, arch.spec(1, sigma0[b]), tape ? &tape->first : nullptr);
  }
  detail::bn_step(x, params.first_bn, tape ? &tape->first_bn : nullptr, update_running);
  for (Tensor& t : x) detail::relu_inplace(t);
  if (tape) tape->first_out = x;

  for (std::size_t bi = 0; bi < params.blocks.size(); ++bi) {
    auto& bp = params.blocks[bi];
    const int k = static_cast<int>(bi) + 2;
    BlockTrace* bt = tape ? &tape->blocks[bi] : nullptr;
    std::vector<Tensor> y(B);
    for (std::size_t b = 0; b < B; ++b)
      y[b] = detail::jet_apply(x[b], bp.conv1, arch.spec(k, sigma0[b]), bt ? &bt->conv1 : nullptr);
    detail::bn_step(y, bp.bn1, bt ? &bt->bn1 : nullptr, update_running);
    for (Tensor& t : y) detail::relu_inplace(t);
    if (bt) bt->act1 = y;
    for (std::size_t b = 0; b < B; ++b)
      y[b] = detail::jet_apply(y[b], bp.conv2, arch.spec(k, sigma0[b]), bt ? &bt->conv2 : nullptr);
    detail::bn_step(y, bp.bn2, bt ? &bt->bn2 : nullptr, update_running);
    if (bp.projection) {
      std::vector<Tensor> s(B);
      for (std::size_t b = 0; b < B; ++b) s[b] = detail::project(x[b], *bp.projection);
      detail::bn_step(s, bp.projection->bn, bt ? &bt->proj_bn : nullptr, update_running);
      for (std::size_t b = 0; b < B; ++b) y[b] += s[b];
    } else {
      for (std::size_t b = 0; b < B; ++b) {
        detail::require_shape(y[b].channels() == x[b].channels(), "residual block: width mismatch");
        y[b] += x[b];
      }
    }
    for (Tensor& t : y) detail::relu_inplace(t);
    x = std::move(y);
    if (bt) bt->out = x;
  }

  for (std::size_t b = 0; b < B; ++b) {
    x[b] = detail::jet_apply(x[b], params.last, arch.spec(Z, sigma0[b]), tape ? &tape->last : nullptr);
    detail::relu_inplace(x[b]);
  }
  if (tape) tape->class_maps = x;
  return x;
}

/// Reverse pass. `grad_maps` holds dL/d(class maps) per item. Parameter
/// gradients accumulate into `grads` (shaped like `params`); input
/// gradients are written to `grad_inputs` when it is non-null.
inline void backward_batch(GradTape& tape, std::vector<Tensor> grad_maps, const ArchConfig& arch,
                           const NetworkParams& params, NetworkParams& grads,
                           std::vector<Tensor>* grad_inputs = nullptr) {
  if (tape.consumed) throw InvalidArgument("backward_batch: tape already consumed");
  tape.consumed = true;
  const std::size_t B = tape.sigma0.size();
  detail::require_shape(grad_maps.size() == B, "backward_batch: gradient batch mismatch");
  const int Z = arch.effective_layers();

  std::vector<Tensor> g(B);
  for (std::size_t b = 0; b < B; ++b) {
    detail::require_shape(grad_maps[b].same_shape(tape.class_maps[b]), "backward_batch: gradient shape");
    detail::relu_gate(grad_maps[b], tape.class_maps[b]);
    g[b] = detail::jet_backward(grad_maps[b], params.last, grads.last, tape.last, b,
                                arch.spec(Z, tape.sigma0[b]), true);
  }

  for (std::size_t bi = params.blocks.size(); bi-- > 0;) {
    const auto& bp = params.blocks[bi];
    auto& gb = grads.blocks[bi];
    BlockTrace& bt = tape.blocks[bi];
    const int k = static_cast<int>(bi) + 2;
    const std::vector<Tensor>& block_in = bi == 0 ? tape.first_out : tape.blocks[bi - 1].out;
    for (std::size_t b = 0; b < B; ++b) detail::relu_gate(g[b], bt.out[b]);

    std::vector<Tensor> skip = g;
    batch_norm_backward(g, bp.bn2, bt.bn2, gb.bn2.scale, gb.bn2.shift);
    for (std::size_t b = 0; b < B; ++b) {
      g[b] = detail::jet_backward(g[b], bp.conv2, gb.conv2, bt.conv2, b, arch.spec(k, tape.sigma0[b]), true);
      detail::relu_gate(g[b], bt.act1[b]);
    }
    batch_norm_backward(g, bp.bn1, bt.bn1, gb.bn1.scale, gb.bn1.shift);
    for (std::size_t b = 0; b < B; ++b)
      g[b] = detail::jet_backward(g[b], bp.conv1, gb.conv1, bt.conv1, b, arch.spec(k, tape.sigma0[b]), true);

    if (bp.projection) {
      const ProjectionParams& pr = *bp.projection;
      ProjectionParams& gpr = *gb.projection;
      batch_norm_backward(skip, pr.bn, bt.proj_bn, gpr.bn.scale, gpr.bn.shift);
      for (std::size_t b = 0; b < B; ++b) {
        for (int o = 0; o < pr.out_channels; ++o)
          for (int i = 0; i < pr.in_channels; ++i) {
            const std::size_t wi = static_cast<std::size_t>(o) * pr.in_channels + i;
            gpr.weights[wi] += detail::dot(skip[b].channel(o), block_in[b].channel(i));
            detail::axpy(pr.weights[wi], skip[b].channel(o), g[b].channel(i));
          }
      }
    } else {
      for (std::size_t b = 0; b < B; ++b) g[b] += skip[b];
    }
  }

  for (std::size_t b = 0; b < B; ++b) detail::relu_gate(g[b], tape.first_out[b]);
  batch_norm_backward(g, params.first_bn, tape.first_bn, grads.first_bn.scale, grads.first_bn.shift);
  if (grad_inputs) grad_inputs->assign(B, Tensor{});
  for (std::size_t b = 0; b < B; ++b) {
    Tensor gi = detail::jet_backward(g[b], params.first, grads.first, tape.first, b,
                                     arch.spec(1, tape.sigma0[b]), grad_inputs != nullptr);
    if (grad_inputs) (*grad_inputs)[b] = std::move(gi);
  }
}

}  // namespace gdres
