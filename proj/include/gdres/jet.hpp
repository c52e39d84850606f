// SPDX-License-Identifier: Apache-2.0
//
// Gaussian derivative (N-jet) layers.
//
// A layer maps c_in input maps to c_out output maps through
//
//   out[o] = sum_i sum_alpha m(alpha) C[o][i][alpha] sigma^|alpha| (delta^alpha T_sigma * in[i])
//
// The smoothing T_sigma runs once per input channel; the difference
// stencils for all alpha are then applied to the shared smoothed map. The
// coefficient index alpha follows jet_index_set() ordering.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gdres/error.hpp"
#include "gdres/filtering.hpp"
#include "gdres/multi_index.hpp"
#include "gdres/tensor.hpp"

namespace gdres {

struct JetSpec {
  int max_order = 2;
  bool include_zero_order = false;
  double sigma = 1.0;
  double epsilon = 0.005;

  std::vector<MultiIndex> indices() const { return jet_index_set(max_order, include_zero_order); }
  int num_indices() const {
    return max_order * (max_order + 3) / 2 + (include_zero_order ? 1 : 0);
  }
  void validate() const {
    if (max_order < 1) throw InvalidArgument("JetSpec: max_order must be at least 1");
    if (!(sigma > 0.0)) throw InvalidArgument("JetSpec: sigma must be positive");
  }
};

/// Coefficients C[c_out][c_in][alpha] of a standard jet layer.
struct JetLayerWeights {
  int out_channels = 0;
  int in_channels = 0;
  int num_indices = 0;
  std::vector<double> coeffs;
  /// One entry per output channel, or empty when a batch norm follows.
  std::vector<double> bias;

  static JetLayerWeights zeros(int out, int in, int num_indices, bool with_bias = false) {
    JetLayerWeights w;
    w.out_channels = out;
    w.in_channels = in;
    w.num_indices = num_indices;
    w.coeffs.assign(static_cast<std::size_t>(out) * in * num_indices, 0.0);
    if (with_bias) w.bias.assign(static_cast<std::size_t>(out), 0.0);
    return w;
  }

  double& coeff(int o, int i, int a) { return coeffs[index(o, i, a)]; }
  double coeff(int o, int i, int a) const { return coeffs[index(o, i, a)]; }

  std::size_t index(int o, int i, int a) const {
    return (static_cast<std::size_t>(o) * in_channels + i) * num_indices + a;
  }
};

/// Depthwise-separable jet layer: one jet combination per input channel
/// followed by a pointwise mixing matrix.
struct DepthSepWeights {
  int out_channels = 0;
  int in_channels = 0;
  int num_indices = 0;
  std::vector<double> depth_coeffs;   // [c_in][alpha]
  std::vector<double> point_weights;  // [c_out][c_in]
  std::vector<double> bias;

  static DepthSepWeights zeros(int out, int in, int num_indices, bool with_bias = false) {
    DepthSepWeights w;
    w.out_channels = out;
    w.in_channels = in;
    w.num_indices = num_indices;
    w.depth_coeffs.assign(static_cast<std::size_t>(in) * num_indices, 0.0);
    w.point_weights.assign(static_cast<std::size_t>(out) * in, 0.0);
    if (with_bias) w.bias.assign(static_cast<std::size_t>(out), 0.0);
    return w;
  }

  double& depth(int i, int a) { return depth_coeffs[static_cast<std::size_t>(i) * num_indices + a]; }
  double depth(int i, int a) const {
    return depth_coeffs[static_cast<std::size_t>(i) * num_indices + a];
  }
  double& point(int o, int i) { return point_weights[static_cast<std::size_t>(o) * in_channels + i]; }
  double point(int o, int i) const {
    return point_weights[static_cast<std::size_t>(o) * in_channels + i];
  }
};

namespace detail {

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  const std::size_t n = y.size();
  const double* xp = x.data();
  double* yp = y.data();
  for (std::size_t i = 0; i < n; ++i) yp[i] += a * xp[i];
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  // Four interleaved partial sums; the summation order is fixed.
  const std::size_t n = x.size();
  const double* xp = x.data();
  const double* yp = y.data();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += xp[i] * yp[i];
    s1 += xp[i + 1] * yp[i + 1];
    s2 += xp[i + 2] * yp[i + 2];
    s3 += xp[i + 3] * yp[i + 3];
  }
  for (; i < n; ++i) s0 += xp[i] * yp[i];
  return (s0 + s1) + (s2 + s3);
}

/// Per-alpha factor m(alpha) sigma^|alpha| applied to each basis response.
inline std::vector<double> basis_gains(const JetSpec& spec) {
  std::vector<double> g;
  for (const MultiIndex& a : spec.indices())
    g.push_back(static_cast<double>(a.multinomial()) * std::pow(spec.sigma, a.total_order()));
  return g;
}

struct Stencils {
  std::vector<std::vector<double>> by_order;
  explicit Stencils(int max_order) {
    for (int o = 0; o <= max_order; ++o) by_order.push_back(difference_stencil(o));
  }
};

}  // namespace detail

/// All normalised basis responses m(alpha) sigma^|alpha| delta^alpha T * in.
///
/// The result has c_in * |alpha-set| channels; channel `i * A + a` holds the
/// response of input channel i to the a-th multi-index.
inline Tensor jet_basis(const Tensor& input, const JetSpec& spec) {
  spec.validate();
  const auto idx = spec.indices();
  const int A = static_cast<int>(idx.size());
  const int h = input.height(), w = input.width();
  const Boundary b = input.boundary();
  const auto gains = detail::basis_gains(spec);
  const detail::Stencils st(spec.max_order);
  auto kernel = KernelCache::instance().get(spec.sigma, spec.epsilon);

  Tensor out(h, w, input.channels() * A, b);
  const std::size_t P = static_cast<std::size_t>(input.plane_size());
  std::vector<double> tmp(P), smooth(P);
  std::vector<std::vector<double>> d1(static_cast<std::size_t>(spec.max_order) + 1,
                                      std::vector<double>(P));
  for (int c = 0; c < input.channels(); ++c) {
    detail::correlate_x1(input.channel(c), tmp, h, w, kernel->taps, b);
    detail::correlate_x2(tmp, smooth, h, w, kernel->taps, b);
    d1[0] = smooth;
    for (int o = 1; o <= spec.max_order; ++o)
      detail::correlate_x1(smooth, d1[static_cast<std::size_t>(o)], h, w, st.by_order[o], b);
    for (int a = 0; a < A; ++a) {
      auto dst = out.channel(c * A + a);
      const auto& src = d1[static_cast<std::size_t>(idx[a].a1)];
      if (idx[a].a2 > 0) {
        detail::correlate_x2(src, dst, h, w, st.by_order[idx[a].a2], b);
        for (double& v : dst) v *= gains[a];
      } else {
        for (std::size_t p = 0; p < P; ++p) dst[p] = gains[a] * src[p];
      }
    }
  }
  return out;
}

/// Adds the input gradient implied by `grad_basis` (shaped like jet_basis
/// output) into `grad_input`.
inline void jet_basis_backward(const Tensor& grad_basis, const JetSpec& spec, Tensor& grad_input) {
  const auto idx = spec.indices();
  const int A = static_cast<int>(idx.size());
  const int h = grad_input.height(), w = grad_input.width();
  const Boundary b = grad_input.boundary();
  detail::require_shape(grad_basis.channels() == grad_input.channels() * A,
                        "jet_basis_backward: channel mismatch");
  const auto gains = detail::basis_gains(spec);
  const detail::Stencils st(spec.max_order);
  auto kernel = KernelCache::instance().get(spec.sigma, spec.epsilon);

  const std::size_t P = static_cast<std::size_t>(grad_input.plane_size());
  std::vector<std::vector<double>> gd1(static_cast<std::size_t>(spec.max_order) + 1,
                                       std::vector<double>(P));
  std::vector<double> scaled(P), gsmooth(P), gtmp(P);
  for (int c = 0; c < grad_input.channels(); ++c) {
    for (auto& v : gd1) std::fill(v.begin(), v.end(), 0.0);
    for (int a = 0; a < A; ++a) {
      auto g = grad_basis.channel(c * A + a);
      auto& dst = gd1[static_cast<std::size_t>(idx[a].a1)];
      if (idx[a].a2 > 0) {
        for (std::size_t p = 0; p < P; ++p) scaled[p] = gains[a] * g[p];
        detail::correlate_x2_adjoint(scaled, dst, h, w, st.by_order[idx[a].a2], b);
      } else {
        detail::axpy(gains[a], g, dst);
      }
    }
    gsmooth = gd1[0];
    for (int o = 1; o <= spec.max_order; ++o)
      detail::correlate_x1_adjoint(gd1[static_cast<std::size_t>(o)], gsmooth, h, w, st.by_order[o], b);
    std::fill(gtmp.begin(), gtmp.end(), 0.0);
    detail::correlate_x2_adjoint(gsmooth, gtmp, h, w, kernel->taps, b);
    detail::correlate_x1_adjoint(gtmp, grad_input.channel(c), h, w, kernel->taps, b);
  }
}

/// out[o] = sum_j C[o][j] basis[j] (+ bias[o]).
inline Tensor combine_standard(const Tensor& basis, const JetLayerWeights& wts) {
  detail::require_shape(basis.channels() == wts.in_channels * wts.num_indices,
                        "jet layer: input channels do not match weights");
  Tensor out(basis.height(), basis.width(), wts.out_channels, basis.boundary());
  const int J = wts.in_channels * wts.num_indices;
  for (int o = 0; o < wts.out_channels; ++o) {
    auto dst = out.channel(o);
    if (!wts.bias.empty()) std::fill(dst.begin(), dst.end(), wts.bias[static_cast<std::size_t>(o)]);
    const double* row = wts.coeffs.data() + static_cast<std::size_t>(o) * J;
    for (int j = 0; j < J; ++j)
      if (row[j] != 0.0) detail::axpy(row[j], basis.channel(j), dst);
  }
  return out;
}

/// h[i] = sum_alpha D[i][alpha] basis[i, alpha].
inline Tensor depthwise_responses(const Tensor& basis, const DepthSepWeights& wts) {
  detail::require_shape(basis.channels() == wts.in_channels * wts.num_indices,
                        "depthwise jet layer: input channels do not match weights");
  Tensor hmap(basis.height(), basis.width(), wts.in_channels, basis.boundary());
  for (int i = 0; i < wts.in_channels; ++i)
    for (int a = 0; a < wts.num_indices; ++a)
      detail::axpy(wts.depth(i, a), basis.channel(i * wts.num_indices + a), hmap.channel(i));
  return hmap;
}

/// out[o] = sum_i P[o][i] h[i] (+ bias[o]).
inline Tensor pointwise_mix(const Tensor& hmap, const DepthSepWeights& wts) {
  Tensor out(hmap.height(), hmap.width(), wts.out_channels, hmap.boundary());
  for (int o = 0; o < wts.out_channels; ++o) {
    auto dst = out.channel(o);
    if (!wts.bias.empty()) std::fill(dst.begin(), dst.end(), wts.bias[static_cast<std::size_t>(o)]);
    for (int i = 0; i < wts.in_channels; ++i)
      if (wts.point(o, i) != 0.0) detail::axpy(wts.point(o, i), hmap.channel(i), dst);
  }
  return out;
}

inline void check_layer(const Tensor& input, int in_channels, int num_indices, const JetSpec& spec) {
  detail::require_shape(input.channels() == in_channels,
                        "jet layer: input has " + std::to_string(input.channels()) +
                            " channels, weights expect " + std::to_string(in_channels));
  detail::require_shape(num_indices == spec.num_indices(),
                        "jet layer: weights do not match the jet index set");
}

inline Tensor jet_layer_forward(const Tensor& input, const JetLayerWeights& wts, const JetSpec& spec) {
  check_layer(input, wts.in_channels, wts.num_indices, spec);
  return combine_standard(jet_basis(input, spec), wts);
}

inline Tensor ds_jet_layer_forward(const Tensor& input, const DepthSepWeights& wts, const JetSpec& spec) {
  check_layer(input, wts.in_channels, wts.num_indices, spec);
  return pointwise_mix(depthwise_responses(jet_basis(input, spec), wts), wts);
}

/// Radius of the grid used to render effective kernels: the truncated
/// Gaussian support plus the half-width of the widest difference stencil,
/// so the rendered kernel holds the complete impulse response.
inline int effective_kernel_radius(const JetSpec& spec) {
  return KernelCache::instance().get(spec.sigma, spec.epsilon)->radius + (spec.max_order + 1) / 2;
}

/// Renders the effective filter w(x; sigma) linking input channel `c_in` to
/// output channel `c_out` as the impulse response on a zero-padded grid of
/// radius effective_kernel_radius(spec). Convolving (not correlating) an
/// input with the result reproduces the layer output away from the border.
inline Tensor effective_kernel(const JetLayerWeights& wts, const JetSpec& spec, int c_out, int c_in) {
  if (c_out < 0 || c_out >= wts.out_channels || c_in < 0 || c_in >= wts.in_channels)
    throw InvalidArgument("effective_kernel: channel index out of range");
  const int r = effective_kernel_radius(spec);
  Tensor impulse(2 * r + 1, 2 * r + 1, 1, Boundary::Zero);
  impulse.at(0, r, r) = 1.0;
  const Tensor basis = jet_basis(impulse, spec);
  Tensor out(2 * r + 1, 2 * r + 1, 1, Boundary::Zero);
  for (int a = 0; a < wts.num_indices; ++a)
    detail::axpy(wts.coeff(c_out, c_in, a), basis.channel(a), out.channel(0));
  return out;
}

/// Effective filter of a depthwise-separable layer: the depthwise jet of
/// `c_in` scaled by its pointwise weight towards `c_out`.
inline Tensor effective_kernel(const DepthSepWeights& wts, const JetSpec& spec, int c_out, int c_in) {
  if (c_out < 0 || c_out >= wts.out_channels || c_in < 0 || c_in >= wts.in_channels)
    throw InvalidArgument("effective_kernel: channel index out of range");
  const int r = effective_kernel_radius(spec);
  Tensor impulse(2 * r + 1, 2 * r + 1, 1, Boundary::Zero);
  impulse.at(0, r, r) = 1.0;
  const Tensor basis = jet_basis(impulse, spec);
  Tensor out(2 * r + 1, 2 * r + 1, 1, Boundary::Zero);
  for (int a = 0; a < wts.num_indices; ++a)
    detail::axpy(wts.point(c_out, c_in) * wts.depth(c_in, a), basis.channel(a), out.channel(0));
  return out;
}

}  // namespace gdres
