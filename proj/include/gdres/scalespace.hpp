// SPDX-License-Identifier: Apache-2.0
//
// Discrete scale-space primitives: the Bessel-based discrete Gaussian,
// separable smoothing, composed central differences and scale-normalised
// Gaussian derivative responses.
#pragma once

#include <cmath>

#include "gdres/bessel.hpp"
#include "gdres/discrete_kernel.hpp"
#include "gdres/filtering.hpp"
#include "gdres/multi_index.hpp"
#include "gdres/tensor.hpp"

namespace gdres {

/// Discrete Gaussian derivative response delta^alpha (T * f), per channel.
///
/// With `normalized` set the response is multiplied by sigma^|alpha|
/// (scale normalisation with power 1).
inline Tensor gauss_der_response(const Tensor& input, const MultiIndex& alpha, double sigma,
                                 double epsilon, bool normalized = true) {
  if (!(sigma > 0.0)) throw InvalidArgument("gauss_der_response: sigma must be positive");
  if (alpha.a1 < 0 || alpha.a2 < 0) throw InvalidArgument("gauss_der_response: negative order");
  Tensor r = smooth_separable(input, sigma, epsilon);
  if (alpha.a1 > 0) r = central_diff(r, Axis::X1, alpha.a1);
  if (alpha.a2 > 0) r = central_diff(r, Axis::X2, alpha.a2);
  if (normalized && alpha.total_order() > 0) r *= std::pow(sigma, alpha.total_order());
  return r;
}

}  // namespace gdres
