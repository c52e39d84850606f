// SPDX-License-Identifier: Apache-2.0
//
// Numerical scale-covariance checks on analytic Gaussian blobs.
//
// A blob of radius sigma_b on an n x n grid and a blob of radius S sigma_b on
// an (S(n-1)+1)^2 grid sample the same scene, with grid point (y, x) of the
// first matching (S y, S x) of the second. Both are unit-peak, so
// scale-normalised responses at sigma and S sigma should agree at matched
// points.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gdres/discrete_kernel.hpp"
#include "gdres/jet.hpp"
#include "gdres/network.hpp"
#include "gdres/params.hpp"
#include "gdres/rng.hpp"
#include "gdres/scalespace.hpp"
#include "gdres/serialize.hpp"

namespace gdres {

/// exp(-r^2 / (2 sigma_b^2)) centred on the grid, optionally elongated:
/// the x1 axis uses sigma_b * aspect.
inline Tensor render_gaussian_blob(int n, double sigma_b, double aspect = 1.0, int channels = 1) {
  Tensor t(n, n, channels);
  const double c = 0.5 * (n - 1);
  for (int ch = 0; ch < channels; ++ch)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double u = (x - c) / (sigma_b * aspect), v = (y - c) / sigma_b;
        t.at(ch, y, x) = std::exp(-0.5 * (u * u + v * v));
      }
  return t;
}

/// Scene built from a few blobs, so that responses differ between classes
/// and positions. Blob centres and radii scale with `S`.
inline Tensor render_blob_scene(int n, double S) {
  struct B {
    double cx, cy, s, a;
  };
  const B blobs[] = {{0.0, 0.0, 2.0, 1.0}, {3.0, -2.0, 1.5, -0.6}, {-2.5, 2.5, 2.5, 0.5}};
  Tensor t(n, n, 1);
  const double c = 0.5 * (n - 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double v = 0.0;
      for (const B& b : blobs) {
        const double u = (x - c) / S - b.cx, w = (y - c) / S - b.cy;
        v += b.a * std::exp(-0.5 * (u * u + w * w) / (b.s * b.s));
      }
      t.at(0, y, x) = v;
    }
  return t;
}

/// max |a - b| / max |a| over all elements.
inline double relative_linf(const Tensor& ref, const Tensor& other) {
  detail::require_shape(ref.same_shape(other), "relative_linf: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    num = std::max(num, std::abs(ref.data()[i] - other.data()[i]));
    den = std::max(den, std::abs(ref.data()[i]));
  }
  return den > 0.0 ? num / den : num;
}

/// Samples `fine` at (S y, S x) for every point of the coarse grid.
inline Tensor subsample_matched(const Tensor& fine, int S, int n) {
  detail::require_shape(fine.height() == S * (n - 1) + 1 && fine.width() == S * (n - 1) + 1,
                        "subsample_matched: grids do not match");
  Tensor out(n, n, fine.channels(), fine.boundary());
  for (int c = 0; c < fine.channels(); ++c)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) out.at(c, y, x) = fine.at(c, S * y, S * x);
  return out;
}

/// Relative L-infinity error between `coarse` and the matched samples of
/// `fine`, on the coarse window that excludes `margin` pixels per side.
inline double matched_relative_linf(const Tensor& coarse, const Tensor& fine, int S, int margin) {
  const int n = coarse.height();
  const Tensor sub = subsample_matched(fine, S, n);
  const int m = n - 2 * margin;
  if (m < 1) throw InvalidArgument("matched_relative_linf: margin too large");
  Tensor a(m, m, coarse.channels()), b(m, m, coarse.channels());
  for (int c = 0; c < coarse.channels(); ++c)
    for (int y = 0; y < m; ++y)
      for (int x = 0; x < m; ++x) {
        a.at(c, y, x) = coarse.at(c, y + margin, x + margin);
        b.at(c, y, x) = sub.at(c, y + margin, x + margin);
      }
  return relative_linf(a, b);
}

struct CheckSection {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  Json detail;
};

struct CovarianceOptions {
  std::uint64_t seed = 7;
  int n = 33;  // coarse grid size; the rescaled grid has 2(n-1)+1 points
  double blob_sigma = 2.0;
  double aspect = 1.0;  // > 1 elongates the blob along x1
  double sigma_min = 1.5;
  double tol_kernel = 1e-10;
  double tol_response = 0.02;
  double tol_response_fine = 0.05;  // at sigma = 1
  double tol_layer = 0.02;
  double tol_channel = 0.03;
};

/// Largest semigroup tap error over a few scale pairs.
inline CheckSection check_kernel_semigroup(const CovarianceOptions&) {
  CheckSection s{"kernel_semigroup", 0.0, 0.0, false, Json::object()};
  const double eps = 1e-10;
  const std::pair<double, double> pairs[] = {{1.0, 1.0}, {0.5, 2.0}, {1.5, 3.0}, {2.0, 4.0}};
  for (auto [a, b] : pairs) {
    const auto ka = disc_gauss_kernel(a, eps), kb = disc_gauss_kernel(b, eps);
    const auto conv = convolve_kernels(ka, kb);
    const auto kc = disc_gauss_kernel(std::hypot(a, b), eps * 1e-6);
    double e = 0.0;
    for (int i = -conv.radius; i <= conv.radius; ++i) {
      const double ref = std::abs(i) <= kc.radius ? kc[i] : 0.0;
      e = std::max(e, std::abs(conv[i] - ref));
    }
    s.error = std::max(s.error, e);
  }
  return s;
}

/// Scale-normalised responses of every jet index at sigma against 2 sigma
/// on the rescaled blob.
inline CheckSection check_derivative_responses(const CovarianceOptions& o, double sigma, double tol) {
  CheckSection s{"derivative_responses_sigma_" + std::to_string(sigma).substr(0, 4), 0.0, tol, false,
                 Json::object()};
  const int S = 2;
  const Tensor f1 = render_gaussian_blob(o.n, o.blob_sigma, o.aspect);
  const Tensor f2 = render_gaussian_blob(S * (o.n - 1) + 1, S * o.blob_sigma, o.aspect);
  const int margin = o.n / 4;
  for (const MultiIndex& a : jet_index_set(2, true)) {
    const Tensor r1 = gauss_der_response(f1, a, sigma, 1e-10);
    const Tensor r2 = gauss_der_response(f2, a, S * sigma, 1e-10);
    const double e = matched_relative_linf(r1, r2, S, margin);
    s.detail[a.str()] = e;
    s.error = std::max(s.error, e);
  }
  return s;
}

namespace detail {

inline ArchConfig covariance_arch() {
  ArchConfig a;
  a.widths = {1, 6, 6, 6, 4};
  a.ratio = 1.2;
  a.epsilon = 1e-6;
  a.selection = SpatialSelection::SpatMax;
  return a;
}

inline NetworkParams random_eval_params(const ArchConfig& arch, std::uint64_t seed) {
  NetworkParams p = zero_params(arch);
  Rng rng(seed);
  he_uniform_init(p, rng);
  std::visit([&](auto& w) { for (double& b : w.bias) b = rng.uniform(-0.05, 0.05); }, p.last);
  set_bn_mode(p, BnMode::Eval);
  return p;
}

}  // namespace detail

/// One random jet layer (pre-ReLU) at sigma and 2 sigma.
inline CheckSection check_jet_layer(const CovarianceOptions& o) {
  CheckSection s{"jet_layer", 0.0, o.tol_layer, false, Json::object()};
  const int S = 2;
  const Tensor f1 = render_gaussian_blob(o.n, o.blob_sigma, o.aspect, 2);
  const Tensor f2 = render_gaussian_blob(S * (o.n - 1) + 1, S * o.blob_sigma, o.aspect, 2);
  Rng rng(o.seed);
  JetLayerWeights w = JetLayerWeights::zeros(3, 2, JetSpec{}.num_indices());
  for (double& c : w.coeffs) c = rng.uniform(-1.0, 1.0);
  JetSpec s1;
  s1.sigma = o.sigma_min;
  s1.epsilon = 1e-10;
  JetSpec s2 = s1;
  s2.sigma = S * o.sigma_min;
  s.error = matched_relative_linf(jet_layer_forward(f1, w, s1), jet_layer_forward(f2, w, s2), S, o.n / 4);
  return s;
}

/// A random residual block with batch norm in Eval mode.
inline CheckSection check_residual_block(const CovarianceOptions& o) {
  CheckSection s{"residual_block", 0.0, o.tol_layer, false, Json::object()};
  const int S = 2;
  ArchConfig arch = detail::covariance_arch();
  arch.widths = {1, 4, 4, 4};
  NetworkParams p = detail::random_eval_params(arch, o.seed);
  const BlockConfig b = arch.block(2);
  // Nonnegative input with structure in both channels.
  Tensor f1 = render_gaussian_blob(o.n, o.blob_sigma, o.aspect, 4);
  Tensor f2 = render_gaussian_blob(S * (o.n - 1) + 1, S * o.blob_sigma, o.aspect, 4);
  const Tensor y1 = residual_block_forward(f1, b, p.blocks[0], arch, o.sigma_min);
  const Tensor y2 = residual_block_forward(f2, b, p.blocks[0], arch, S * o.sigma_min);
  s.error = matched_relative_linf(y1, y2, S, o.n / 4);
  return s;
}

/// A full six-layer random channel: class maps and spatial-max argmax.
inline CheckSection check_channel(const CovarianceOptions& o) {
  CheckSection s{"scale_channel", 0.0, o.tol_channel, false, Json::object()};
  const int S = 2;
  const ArchConfig arch = detail::covariance_arch();
  const NetworkParams p = detail::random_eval_params(arch, o.seed);
  const Tensor f1 = render_blob_scene(o.n, 1.0);
  const Tensor f2 = render_blob_scene(S * (o.n - 1) + 1, S);
  const Tensor m1 = scale_channel_forward(f1, {arch, o.sigma_min}, p);
  const Tensor m2 = scale_channel_forward(f2, {arch, S * o.sigma_min}, p);
  s.error = matched_relative_linf(m1, m2, S, o.n / 4);
  const int a1 = argmax(spatial_select(m1, SpatialSelection::SpatMax));
  const int a2 = argmax(spatial_select(m2, SpatialSelection::SpatMax));
  s.detail["argmax_coarse"] = a1;
  s.detail["argmax_fine"] = a2;
  s.detail["argmax_equal"] = a1 == a2;
  s.passed = a1 == a2;  // combined with the tolerance below
  return s;
}

/// Multi-channel network with lambda = sqrt(2): doubling the image size and
/// extending the channel set by two shifts the per-channel class vectors
/// by two channels and keeps the predicted class.
inline CheckSection check_channel_shift(const CovarianceOptions& o) {
  CheckSection s{"channel_shift", 0.0, o.tol_channel, false, Json::object()};
  const int S = 2;
  ArchConfig arch = detail::covariance_arch();
  arch.selection = SpatialSelection::Centre;
  const NetworkParams p = detail::random_eval_params(arch, o.seed + 1);
  MultiNetConfig c1;
  c1.arch = arch;
  c1.lambda = std::sqrt(2.0);
  c1.channel_sigmas = channel_initial_scales(o.sigma_min, c1.lambda, 3);
  MultiNetConfig c2 = c1;
  c2.channel_sigmas = channel_initial_scales(o.sigma_min, c1.lambda, 5);
  const Tensor f1 = render_blob_scene(o.n, 1.0);
  const Tensor f2 = render_blob_scene(S * (o.n - 1) + 1, S);
  const Prediction p1 = multi_channel_predict(f1, c1, p);
  const Prediction p2 = multi_channel_predict(f2, c2, p);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p1.per_channel.size(); ++i)
    for (std::size_t k = 0; k < p1.per_channel[i].size(); ++k) {
      num = std::max(num, std::abs(p1.per_channel[i][k] - p2.per_channel[i + 2][k]));
      den = std::max(den, std::abs(p1.per_channel[i][k]));
    }
  s.error = den > 0.0 ? num / den : num;
  auto winner = [](const Prediction& p) {
    std::size_t best = 0;
    for (std::size_t n = 1; n < p.per_channel.size(); ++n)
      if (p.per_channel[n][static_cast<std::size_t>(p.label)] >
          p.per_channel[best][static_cast<std::size_t>(p.label)])
        best = n;
    return static_cast<int>(best);
  };
  s.detail["label_coarse"] = p1.label;
  s.detail["label_fine"] = p2.label;
  s.detail["winner_coarse"] = winner(p1);
  s.detail["winner_fine"] = winner(p2);
  s.passed = p1.label == p2.label && winner(p2) == winner(p1) + 2;
  return s;
}

struct CovarianceReport {
  std::vector<CheckSection> sections;
  bool passed() const {
    return std::all_of(sections.begin(), sections.end(), [](const CheckSection& s) { return s.passed; });
  }
  Json to_json() const {
    Json j{{"schema", "gdres.covariance.v1"}, {"passed", passed()}, {"sections", Json::array()}};
    for (const auto& s : sections)
      j["sections"].push_back(
          {{"name", s.name}, {"max_error", s.error}, {"tolerance", s.tolerance}, {"passed", s.passed}, {"detail", s.detail}});
    return j;
  }
};

inline CovarianceReport run_covariance_checks(const CovarianceOptions& o) {
  CovarianceReport r;
  auto add = [&](CheckSection s, bool extra_ok = true) {
    s.passed = extra_ok && s.error < s.tolerance;
    r.sections.push_back(std::move(s));
  };
  CheckSection k = check_kernel_semigroup(o);
  k.tolerance = o.tol_kernel;
  add(k);
  add(check_derivative_responses(o, 1.0, o.tol_response_fine));
  for (double sg : {o.sigma_min, 2.0, 3.0})
    if (sg >= o.sigma_min) add(check_derivative_responses(o, sg, o.tol_response));
  add(check_jet_layer(o));
  add(check_residual_block(o));
  CheckSection ch = check_channel(o);
  add(ch, ch.passed);
  CheckSection sh = check_channel_shift(o);
  add(sh, sh.passed);
  return r;
}

}  // namespace gdres
