// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "gdres/bessel.hpp"
#include "gdres/error.hpp"

namespace gdres {

/// Symmetric 1-D kernel with taps indexed -radius..radius.
struct DiscreteKernel1D {
  std::vector<double> taps;  // taps[n + radius]
  int radius = 0;
  double sigma = 0.0;
  double tail_mass = 0.0;

  double operator[](int n) const { return taps[static_cast<std::size_t>(n + radius)]; }
  int size() const { return 2 * radius + 1; }

  double sum() const {
    double s = 0.0;
    for (double t : taps) s += t;
    return s;
  }
};

/// Discrete analogue of the Gaussian, T(n; sigma) = e^{-sigma^2} I_n(sigma^2).
///
/// The radius is the smallest R whose two-sided discarded mass is below
/// `epsilon`. Taps are not renormalised after truncation, so the kernel
/// family keeps its exact semigroup property.
inline DiscreteKernel1D disc_gauss_kernel(double sigma, double epsilon) {
  if (!(sigma >= 0.0)) throw InvalidArgument("disc_gauss_kernel: sigma must be non-negative");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw InvalidArgument("disc_gauss_kernel: epsilon must lie in (0, 1)");

  DiscreteKernel1D k;
  k.sigma = sigma;
  const double s = sigma * sigma;
  if (s == 0.0) {
    k.taps = {1.0};
    return k;
  }
  // Gaussian tail bound with generous headroom; the exact cut is found below.
  const int nmax =
      static_cast<int>(std::ceil(sigma * std::sqrt(2.0 * std::log(4.0 / epsilon)) * 1.5)) + 8;
  const std::vector<double> half = scaled_bessel_i_sequence(nmax, s);

  double mass = half[0];
  int radius = 0;
  while (1.0 - mass >= epsilon && radius < nmax) {
    ++radius;
    mass += 2.0 * half[static_cast<std::size_t>(radius)];
  }
  k.radius = radius;
  k.tail_mass = std::max(0.0, 1.0 - mass);
  k.taps.resize(static_cast<std::size_t>(2 * radius + 1));
  for (int n = -radius; n <= radius; ++n)
    k.taps[static_cast<std::size_t>(n + radius)] = half[static_cast<std::size_t>(std::abs(n))];
  return k;
}

/// Full discrete convolution of two kernels (radii add).
inline DiscreteKernel1D convolve_kernels(const DiscreteKernel1D& a, const DiscreteKernel1D& b) {
  DiscreteKernel1D r;
  r.radius = a.radius + b.radius;
  r.sigma = std::sqrt(a.sigma * a.sigma + b.sigma * b.sigma);
  r.taps.assign(static_cast<std::size_t>(2 * r.radius + 1), 0.0);
  for (int i = -a.radius; i <= a.radius; ++i)
    for (int j = -b.radius; j <= b.radius; ++j)
      r.taps[static_cast<std::size_t>(i + j + r.radius)] += a[i] * b[j];
  r.tail_mass = std::max(0.0, 1.0 - r.sum());
  return r;
}

/// Process-wide read-only table of kernels keyed by (sigma, epsilon).
class KernelCache {
 public:
  static KernelCache& instance() {
    static KernelCache cache;
    return cache;
  }

  std::shared_ptr<const DiscreteKernel1D> get(double sigma, double epsilon) {
    const std::pair<double, double> key{sigma, epsilon};
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = table_.find(key);
    if (it != table_.end()) return it->second;
    auto k = std::make_shared<const DiscreteKernel1D>(disc_gauss_kernel(sigma, epsilon));
    table_.emplace(key, k);
    return k;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<double, double>, std::shared_ptr<const DiscreteKernel1D>> table_;
};

}  // namespace gdres
