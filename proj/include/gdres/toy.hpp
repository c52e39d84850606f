// SPDX-License-Identifier: Apache-2.0
//
// Synthetic shape dataset with a controllable object size.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "gdres/dataset.hpp"
#include "gdres/error.hpp"
#include "gdres/rng.hpp"
#include "gdres/tensor.hpp"

namespace gdres {

/// Shape vocabulary; class c renders toy_shape_names[c].
inline constexpr std::array<std::string_view, 5> toy_shape_names{"disc", "annulus", "cross", "bar_pair", "square"};

struct ToySpec {
  int num_classes = 4;
  int samples_per_class = 200;
  /// Object radius in pixels at size factor 1.
  double base_size = 5.0;
  int canvas_h = 32;
  int canvas_w = 32;
  double size_factor = 1.0;
  /// Uniform centre offset range in pixels at size factor 1.
  double jitter = 1.0;
  /// Relative per-sample size variation.
  double size_jitter = 0.1;
  double contrast_min = 0.6;
  double contrast_max = 1.0;
  double background_range = 0.1;
  double noise = 0.02;
  int supersample = 5;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_classes < 2) throw InvalidArgument("toy dataset: need at least two classes");
    if (num_classes > static_cast<int>(toy_shape_names.size()))
      throw InvalidArgument("toy dataset: at most " + std::to_string(toy_shape_names.size()) + " classes");
    if (samples_per_class < 1) throw InvalidArgument("toy dataset: samples_per_class must be positive");
    if (!(base_size > 0.0) || !(size_factor > 0.0)) throw InvalidArgument("toy dataset: sizes must be positive");
    if (canvas_h < 1 || canvas_w < 1 || supersample < 1) throw InvalidArgument("toy dataset: bad canvas");
    if (contrast_min > contrast_max || size_jitter < 0.0 || size_jitter >= 1.0 || noise < 0.0 || jitter < 0.0)
      throw InvalidArgument("toy dataset: bad randomisation ranges");
  }
};

/// Indicator of shape `cls` at offset (u, v) from its centre, radius s.
inline bool toy_shape_inside(int cls, double u, double v, double s) {
  const double au = std::abs(u), av = std::abs(v);
  switch (cls) {
    case 0: return u * u + v * v <= s * s;
    case 1: {
      const double r2 = u * u + v * v;
      return r2 <= s * s && r2 >= 0.3025 * s * s;
    }
    case 2: return (au <= 0.3 * s && av <= s) || (av <= 0.3 * s && au <= s);
    case 3: return av <= s && au >= 0.25 * s && au <= 0.6 * s;
    case 4: return au <= 0.8 * s && av <= 0.8 * s;
    default: throw InvalidArgument("toy dataset: unknown shape " + std::to_string(cls));
  }
}

struct ToySample {
  int label = 0;
  double dx = 0.0, dy = 0.0;  // centre offset at size factor 1
  double size_mult = 1.0;
  double contrast = 1.0;
  double background = 0.0;
  std::uint64_t noise_seed = 0;
};

/// Per-sample parameters; independent of canvas and size factor so a
/// dataset can be re-rendered at other sizes.
inline ToySample toy_sample_params(const ToySpec& spec, int index) {
  Rng rng(spec.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(index) * 0xbf58476d1ce4e5b9ULL + 1);
  ToySample s;
  s.label = index % spec.num_classes;
  s.dx = rng.uniform(-spec.jitter, spec.jitter);
  s.dy = rng.uniform(-spec.jitter, spec.jitter);
  s.size_mult = rng.uniform(1.0 - spec.size_jitter, 1.0 + spec.size_jitter);
  s.contrast = rng.uniform(spec.contrast_min, spec.contrast_max);
  s.background = rng.uniform(-spec.background_range, spec.background_range);
  s.noise_seed = rng.next();
  return s;
}

/// Renders one sample with area-sampled anti-aliasing.
inline Tensor render_toy_sample(const ToySpec& spec, const ToySample& s) {
  Tensor img(spec.canvas_h, spec.canvas_w, 1);
  const double f = spec.size_factor;
  const double r = spec.base_size * s.size_mult * f;
  const double cx = 0.5 * spec.canvas_w + s.dx * f;
  const double cy = 0.5 * spec.canvas_h + s.dy * f;
  const int ss = spec.supersample;
  const double inv = 1.0 / (ss * ss);
  Rng noise(s.noise_seed);
  for (int y = 0; y < spec.canvas_h; ++y)
    for (int x = 0; x < spec.canvas_w; ++x) {
      int hits = 0;
      for (int j = 0; j < ss; ++j)
        for (int i = 0; i < ss; ++i) {
          const double u = x + (i + 0.5) / ss - cx;
          const double v = y + (j + 0.5) / ss - cy;
          hits += toy_shape_inside(s.label, u, v, r) ? 1 : 0;
        }
      double val = s.background + s.contrast * hits * inv;
      if (spec.noise > 0.0) val += spec.noise * noise.normal();
      img.at(0, y, x) = val;
    }
  return img;
}

/// num_classes * samples_per_class images, classes interleaved.
inline LabeledSet gen_toy_dataset(const ToySpec& spec) {
  spec.validate();
  LabeledSet set;
  set.num_classes = spec.num_classes;
  const int n = spec.num_classes * spec.samples_per_class;
  for (int i = 0; i < n; ++i) {
    const ToySample s = toy_sample_params(spec, i);
    set.images.push_back(render_toy_sample(spec, s));
    set.labels.push_back(s.label);
  }
  return set;
}

}  // namespace gdres
