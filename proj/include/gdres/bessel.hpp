// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gdres/error.hpp"

namespace gdres {

struct BesselConfig {
  /// Power series stops once a term drops below this fraction of the sum.
  double series_tolerance = 1e-17;
  /// Cap on power-series terms before NonConvergence is raised.
  int max_terms = 1000;
};

namespace detail {

// Arguments above this use normalised backward recurrence instead of the
// power series.
inline constexpr double kBesselSeriesLimit = 30.0;

inline double scaled_bessel_series(int n, double s, const BesselConfig& cfg) {
  if (s == 0.0) return n == 0 ? 1.0 : 0.0;
  const double half = 0.5 * s;
  // e^{-s} folded into the first term keeps every partial sum bounded.
  double term = std::exp(n * std::log(half) - std::lgamma(n + 1.0) - s);
  double sum = term;
  const double q = half * half;
  for (int k = 0;; ++k) {
    if (k >= cfg.max_terms)
      throw NonConvergence("scaled_bessel_i: power series did not converge within " +
                           std::to_string(cfg.max_terms) + " terms");
    term *= q / ((k + 1.0) * (k + 1.0 + n));
    sum += term;
    // Terms grow until k ~ s/2, so only stop once past the peak.
    if (k + 1 > half && term <= cfg.series_tolerance * sum) break;
  }
  return sum;
}

// Miller's backward recurrence I_{k-1} = (2k/s) I_k + I_{k+1}, normalised
// with e^{-s} (I_0 + 2 sum_k I_k) = 1. Returns e^{-s} I_k(s) for k = 0..nmax.
inline std::vector<double> scaled_bessel_miller(int nmax, double s) {
  const int start = nmax + static_cast<int>(std::ceil(10.0 * std::sqrt(s))) + 32;
  std::vector<double> out(static_cast<std::size_t>(nmax) + 1, 0.0);
  double next = 0.0;  // b_{k+1}
  double cur = 1e-280;  // b_k
  double norm = 0.0;
  for (int k = start; k >= 1; --k) {
    const double prev = (2.0 * k / s) * cur + next;  // b_{k-1}
    norm += 2.0 * cur;
    if (k <= nmax) out[static_cast<std::size_t>(k)] = cur;
    next = cur;
    cur = prev;
    if (std::abs(cur) > 1e250) {
      const double r = 1e-250;
      cur *= r;
      next *= r;
      norm *= r;
      for (int j = k - 1; j <= nmax; ++j)
        if (j >= 0) out[static_cast<std::size_t>(j)] *= r;
    }
  }
  out[0] = cur;
  norm += cur;
  for (double& v : out) v /= norm;
  return out;
}

}  // namespace detail

/// e^{-s} I_n(s), the exponentially scaled modified Bessel function of the
/// first kind and integer order. Stays finite for arguments up to 1e4 and
/// beyond; the result lies in [0, 1].
inline double scaled_bessel_i(int n, double s, const BesselConfig& cfg = {}) {
  if (n < 0) throw InvalidArgument("scaled_bessel_i: order must be non-negative");
  if (!(s >= 0.0)) throw InvalidArgument("scaled_bessel_i: argument must be non-negative");
  if (!(cfg.series_tolerance > 0.0))
    throw InvalidArgument("scaled_bessel_i: series_tolerance must be positive");
  if (s <= detail::kBesselSeriesLimit) return detail::scaled_bessel_series(n, s, cfg);
  return detail::scaled_bessel_miller(n, s)[static_cast<std::size_t>(n)];
}

/// e^{-s} I_k(s) for k = 0..nmax in one sweep.
inline std::vector<double> scaled_bessel_i_sequence(int nmax, double s,
                                                    const BesselConfig& cfg = {}) {
  if (nmax < 0) throw InvalidArgument("scaled_bessel_i_sequence: nmax must be non-negative");
  if (!(s >= 0.0)) throw InvalidArgument("scaled_bessel_i_sequence: argument must be non-negative");
  if (s > detail::kBesselSeriesLimit) return detail::scaled_bessel_miller(nmax, s);
  std::vector<double> out(static_cast<std::size_t>(nmax) + 1);
  for (int k = 0; k <= nmax; ++k) out[static_cast<std::size_t>(k)] = detail::scaled_bessel_series(k, s, cfg);
  return out;
}

}  // namespace gdres
