// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations used only by the tests. They share no code
// with the library beyond the Tensor container.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gdres/tensor.hpp"

namespace oracle {

/// e^{-s} I_n(s) by the plain power series in long double.
inline long double scaled_bessel(int n, long double s) {
  if (s == 0.0L) return n == 0 ? 1.0L : 0.0L;
  const long double half = s / 2.0L;
  long double term = 1.0L;
  for (int k = 1; k <= n; ++k) term *= half / k;
  long double sum = 0.0L;
  for (int k = 0; k < 5000; ++k) {
    sum += term;
    term *= half * half / ((k + 1.0L) * (k + 1.0L + n));
    if (k > s && term < 1e-22L * sum) break;
  }
  return sum * std::exp(-s);
}

/// Discrete Gaussian taps at -R..R.
inline std::vector<double> discrete_gaussian(double sigma, int R) {
  std::vector<double> t;
  for (int n = -R; n <= R; ++n) t.push_back(static_cast<double>(scaled_bessel(std::abs(n), sigma * sigma)));
  return t;
}

/// d^n/du^n exp(-u^2 / (2 s^2)) via probabilists' Hermite polynomials.
inline double gauss_derivative_1d(double u, double s, int n) {
  const double z = u / s;
  double h0 = 1.0, h1 = z;
  double hn = n == 0 ? h0 : h1;
  for (int k = 1; k < n; ++k) {
    hn = z * h1 - k * h0;
    h0 = h1;
    h1 = hn;
  }
  return std::pow(-1.0 / s, n) * hn * std::exp(-0.5 * z * z);
}

/// Continuous scale-normalised response of the unit-peak blob
/// exp(-r^2 / (2 sb^2)) smoothed with a unit-mass Gaussian of scale sigma,
/// at offset (u, v) from the blob centre.
inline double blob_response(double u, double v, double sb, double sigma, int a1, int a2) {
  const double s2 = sb * sb + sigma * sigma;
  const double s = std::sqrt(s2);
  const double amp = sb * sb / s2;
  return amp * std::pow(sigma, a1 + a2) * gauss_derivative_1d(u, s, a1) * gauss_derivative_1d(v, s, a2);
}

inline int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Direct 2-D correlation of one plane with a full (non-separable) kernel
/// given as rows over x2 and columns over x1, centred, mirror or zero border.
inline std::vector<double> correlate_2d(const gdres::Tensor& in, int c, const std::vector<std::vector<double>>& k,
                                        bool mirror) {
  const int h = in.height(), w = in.width();
  const int ry = static_cast<int>(k.size()) / 2, rx = static_cast<int>(k[0].size()) / 2;
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dy = -ry; dy <= ry; ++dy)
        for (int dx = -rx; dx <= rx; ++dx) {
          int yy = y + dy, xx = x + dx;
          if (mirror) {
            yy = reflect(yy, h);
            xx = reflect(xx, w);
          } else if (yy < 0 || yy >= h || xx < 0 || xx >= w) {
            continue;
          }
          s += k[static_cast<std::size_t>(dy + ry)][static_cast<std::size_t>(dx + rx)] * in.at(c, yy, xx);
        }
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

/// 1-D convolution of tap vectors (full length).
inline std::vector<double> conv(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

/// Correlation taps of the n-th order composed central difference.
inline std::vector<double> difference(int n) {
  std::vector<double> s{1.0};
  for (int j = 0; j < n / 2; ++j) s = conv(s, {1.0, -2.0, 1.0});
  if (n % 2) s = conv(s, {-0.5, 0.0, 0.5});
  return s;
}

/// Full 2-D correlation kernel of m(alpha) sigma^|alpha| delta^alpha T.
///
/// Only exact for an interior pixel: the library filters in separable
/// stages, each with its own boundary handling.
inline std::vector<std::vector<double>> jet_kernel(double sigma, int R, int a1, int a2) {
  const auto g = discrete_gaussian(sigma, R);
  // Two correlations in sequence equal one correlation with the
  // convolution of their tap sequences.
  const auto kx = conv(g, difference(a1));
  const auto ky = conv(g, difference(a2));
  double m = 1.0;
  for (int i = 1; i <= a1; ++i) m = m * (a2 + i) / i;
  const double gain = m * std::pow(sigma, a1 + a2);
  std::vector<std::vector<double>> k(ky.size(), std::vector<double>(kx.size()));
  for (std::size_t y = 0; y < ky.size(); ++y)
    for (std::size_t x = 0; x < kx.size(); ++x) k[y][x] = gain * ky[y] * kx[x];
  return k;
}

/// Central-difference derivative of f with respect to every entry of x.
inline std::vector<double> numeric_gradient(std::vector<double>& x, const std::function<double()>& f,
                                            double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f();
    x[i] = keep - h;
    const double fm = f();
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double n = std::max(std::sqrt(na), std::sqrt(nb));
  return n > 0.0 ? std::sqrt(d) / n : 0.0;
}

}  // namespace oracle
