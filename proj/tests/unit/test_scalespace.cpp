// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>

#include "gdres/scalespace.hpp"
#include "oracles.hpp"

using namespace gdres;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct BesselRef {
  int n;
  double s;
  double value;
};

// e^{-s} I_n(s) to 17 digits from an arbitrary-precision evaluation.
constexpr BesselRef kBessel[] = {
    {0, 0.25, 0.79101716213971936},  {0, 1, 0.46575960759364044},    {1, 1, 0.20791041534970845},
    {2, 1, 0.049938776894223539},    {0, 4, 0.2070019212239867},     {3, 4, 0.061124338029666293},
    {5, 4, 0.0092443491731271017},   {0, 16, 0.10054412736125202},   {4, 16, 0.060154516125207994},
    {10, 16, 0.0044374208564069439}, {0, 64, 0.049966053382357373},  {8, 64, 0.030206265612668473},
    {20, 64, 0.0021976593069193318}, {0, 100, 0.039944379299096683}, {15, 100, 0.01292237725605243},
    {2, 1000, 0.012592018595377399},
};

Tensor ramp_image(int h, int w) {
  Tensor t(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) t.at(0, y, x) = std::sin(0.3 * x + 0.1 * y) + 0.02 * x * y;
  return t;
}

}  // namespace

TEST_CASE("scaled Bessel values match frozen references", "[bessel]") {
  for (const auto& r : kBessel) {
    INFO("n=" << r.n << " s=" << r.s);
    CHECK_THAT(scaled_bessel_i(r.n, r.s), WithinRel(r.value, 1e-12));
  }
}

TEST_CASE("scaled Bessel agrees with the long-double series", "[bessel]") {
  for (double s : {0.01, 0.3, 2.0, 9.0, 25.0, 29.9, 30.1, 50.0, 200.0})
    for (int n : {0, 1, 2, 5, 11}) {
      INFO("n=" << n << " s=" << s);
      const double ref = static_cast<double>(oracle::scaled_bessel(n, s));
      CHECK_THAT(scaled_bessel_i(n, s), WithinAbs(ref, 1e-12 * std::max(1.0, ref)));
    }
}

TEST_CASE("scaled Bessel edge cases", "[bessel]") {
  CHECK(scaled_bessel_i(0, 0.0) == 1.0);
  CHECK(scaled_bessel_i(3, 0.0) == 0.0);
  CHECK_THROWS_AS(scaled_bessel_i(-1, 1.0), InvalidArgument);
  CHECK_THROWS_AS(scaled_bessel_i(0, -1.0), InvalidArgument);
  const double big = scaled_bessel_i(0, 1e4);
  CHECK(std::isfinite(big));
  // Large-argument asymptote 1/sqrt(2 pi s).
  CHECK_THAT(big, WithinRel(1.0 / std::sqrt(2.0 * M_PI * 1e4), 1e-4));
  BesselConfig tight;
  tight.max_terms = 2;
  CHECK_THROWS_AS(scaled_bessel_i(0, 20.0, tight), NonConvergence);
}

TEST_CASE("Bessel sequence matches single evaluations", "[bessel]") {
  for (double s : {0.5, 12.0, 45.0}) {
    const auto seq = scaled_bessel_i_sequence(8, s);
    for (int n = 0; n <= 8; ++n) CHECK_THAT(seq[static_cast<std::size_t>(n)], WithinAbs(scaled_bessel_i(n, s), 1e-14));
  }
}

TEST_CASE("discrete Gaussian mass, symmetry and truncation", "[kernel]") {
  for (double sigma : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const auto k = disc_gauss_kernel(sigma, 1e-10);
    INFO("sigma=" << sigma);
    CHECK(std::abs(k.sum() - 1.0) < 1e-9);
    CHECK(k.tail_mass < 1e-10);
    for (int n = 1; n <= k.radius; ++n) CHECK(k[n] == k[-n]);
    // The radius is minimal: dropping the outer pair exceeds the bound.
    CHECK(1.0 - (k.sum() - 2.0 * k[k.radius]) >= 1e-10);
    // Variance of the discrete Gaussian equals sigma^2.
    double var = 0.0;
    for (int n = -k.radius; n <= k.radius; ++n) var += n * n * k[n];
    CHECK_THAT(var, WithinRel(sigma * sigma, 1e-7));
  }
  CHECK(disc_gauss_kernel(0.0, 1e-3).taps == std::vector<double>{1.0});
  CHECK_THROWS_AS(disc_gauss_kernel(-1.0, 1e-3), InvalidArgument);
  CHECK_THROWS_AS(disc_gauss_kernel(1.0, 0.0), InvalidArgument);
}

TEST_CASE("discrete Gaussian taps equal the oracle", "[kernel]") {
  const auto k = disc_gauss_kernel(1.7, 1e-12);
  const auto ref = oracle::discrete_gaussian(1.7, k.radius);
  for (int n = -k.radius; n <= k.radius; ++n)
    CHECK_THAT(k[n], WithinAbs(ref[static_cast<std::size_t>(n + k.radius)], 1e-15));
}

TEST_CASE("semigroup T(s) * T(t) = T(sqrt(s^2 + t^2))", "[kernel]") {
  const std::pair<double, double> pairs[] = {{1.0, 1.0}, {0.5, 2.0}, {3.0, 4.0}};
  for (auto [a, b] : pairs) {
    const auto c = convolve_kernels(disc_gauss_kernel(a, 1e-14), disc_gauss_kernel(b, 1e-14));
    const auto ref = disc_gauss_kernel(std::hypot(a, b), 1e-15);
    double e = 0.0;
    for (int n = -c.radius; n <= c.radius; ++n)
      e = std::max(e, std::abs(c[n] - (std::abs(n) <= ref.radius ? ref[n] : 0.0)));
    CHECK(e < 1e-10);
  }
}

TEST_CASE("kernel cache returns shared kernels", "[kernel]") {
  auto a = KernelCache::instance().get(1.25, 1e-6);
  auto b = KernelCache::instance().get(1.25, 1e-6);
  CHECK(a.get() == b.get());
  CHECK(a->radius == disc_gauss_kernel(1.25, 1e-6).radius);
}

TEST_CASE("difference stencils", "[filter]") {
  CHECK(difference_stencil(0) == std::vector<double>{1.0});
  CHECK(difference_stencil(1) == std::vector<double>{-0.5, 0.0, 0.5});
  CHECK(difference_stencil(2) == std::vector<double>{1.0, -2.0, 1.0});
  CHECK(difference_stencil(3) == std::vector<double>{-0.5, 1.0, 0.0, -1.0, 0.5});
  CHECK(difference_stencil(4) == std::vector<double>{1.0, -4.0, 6.0, -4.0, 1.0});
}

TEST_CASE("central differences are exact on low-order polynomials", "[filter]") {
  Tensor t(9, 11, 1, Boundary::Zero);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 11; ++x) t.at(0, y, x) = 0.5 * x * x + 3.0 * x * y - y;
  const Tensor dx = central_diff(t, Axis::X1, 1);
  const Tensor dyy = central_diff(t, Axis::X2, 2);
  const Tensor dxx = central_diff(t, Axis::X1, 2);
  for (int y = 1; y < 8; ++y)
    for (int x = 1; x < 10; ++x) {
      CHECK_THAT(dx.at(0, y, x), WithinAbs(x + 3.0 * y, 1e-12));
      CHECK_THAT(dxx.at(0, y, x), WithinAbs(1.0, 1e-12));
      CHECK_THAT(dyy.at(0, y, x), WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("mirror boundary reflects without repeating the edge", "[filter]") {
  CHECK(detail::reflect_index(-1, 5) == 1);
  CHECK(detail::reflect_index(-2, 5) == 2);
  CHECK(detail::reflect_index(5, 5) == 3);
  CHECK(detail::reflect_index(9, 5) == 1);
  CHECK(detail::reflect_index(0, 1) == 0);
  for (int i = -20; i < 25; ++i) CHECK(detail::reflect_index(i, 6) == oracle::reflect(i, 6));
}

TEST_CASE("smoothing matches a direct 2-D correlation", "[filter]") {
  for (bool mirror : {true, false}) {
    Tensor t = ramp_image(12, 15);
    t.set_boundary(mirror ? Boundary::Mirror : Boundary::Zero);
    const double sigma = 1.3;
    const auto k = disc_gauss_kernel(sigma, 1e-12);
    const Tensor s = smooth_separable(t, sigma, 1e-12);
    const auto ker = oracle::jet_kernel(sigma, k.radius, 0, 0);
    const auto ref = oracle::correlate_2d(t, 0, ker, mirror);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK_THAT(s.data()[i], WithinAbs(ref[i], 1e-12));
  }
}

TEST_CASE("smoothing preserves constants and mass", "[filter]") {
  Tensor c(10, 10, 1);
  for (double& v : c.data()) v = 2.5;
  const Tensor s = smooth_separable(c, 2.0, 1e-12);
  for (double v : s.data()) CHECK_THAT(v, WithinAbs(2.5, 1e-10));

  Tensor imp(41, 41, 1, Boundary::Zero);
  imp.at(0, 20, 20) = 1.0;
  const Tensor si = smooth_separable(imp, 2.0, 1e-12);
  double sum = 0.0;
  for (double v : si.data()) sum += v;
  CHECK_THAT(sum, WithinAbs(1.0, 1e-10));
}

TEST_CASE("smoothed blob matches the analytic semigroup", "[scalespace]") {
  // Blob with sigma_b = 3 on 65 x 65, smoothed at sigma = 2, against the
  // sampled continuous result exp(-r^2 / (2 * 13)) * 9 / 13.
  const int n = 65;
  const double sb = 3.0, sigma = 2.0, c = 32.0;
  Tensor blob(n, n, 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) blob.at(0, y, x) = std::exp(-0.5 * ((x - c) * (x - c) + (y - c) * (y - c)) / (sb * sb));
  const Tensor r = gauss_der_response(blob, {0, 0}, sigma, 1e-10);
  double num = 0.0, den = 0.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double ref = oracle::blob_response(x - c, y - c, sb, sigma, 0, 0);
      num += (r.at(0, y, x) - ref) * (r.at(0, y, x) - ref);
      den += ref * ref;
    }
  CHECK(std::sqrt(num / den) < 0.01);
}

TEST_CASE("normalised second derivative matches the analytic oracle", "[scalespace]") {
  const int n = 65;
  const double sb = 3.0, sigma = 2.0, c = 32.0;
  Tensor blob(n, n, 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) blob.at(0, y, x) = std::exp(-0.5 * ((x - c) * (x - c) + (y - c) * (y - c)) / (sb * sb));
  const Tensor r = gauss_der_response(blob, {2, 0}, sigma, 1e-10);
  double num = 0.0, den = 0.0;
  for (int y = 16; y <= 48; ++y)
    for (int x = 16; x <= 48; ++x) {
      const double ref = oracle::blob_response(x - c, y - c, sb, sigma, 2, 0);
      num = std::max(num, std::abs(r.at(0, y, x) - ref));
      den = std::max(den, std::abs(ref));
    }
  CHECK(num / den < 0.02);
}

TEST_CASE("first derivative of a linear ramp equals sigma times slope", "[scalespace]") {
  // Wide enough that the reflected border stays outside the kernel support.
  Tensor t(61, 61, 1);
  for (int y = 0; y < 61; ++y)
    for (int x = 0; x < 61; ++x) t.at(0, y, x) = 0.7 * x;
  const double mass = disc_gauss_kernel(1.5, 1e-12).sum();
  const Tensor r = gauss_der_response(t, {1, 0}, 1.5, 1e-12);
  CHECK_THAT(r.at(0, 30, 30), WithinAbs(1.5 * 0.7 * mass * mass, 1e-12));
  const Tensor raw = gauss_der_response(t, {1, 0}, 1.5, 1e-12, false);
  CHECK_THAT(raw.at(0, 30, 30), WithinAbs(0.7 * mass * mass, 1e-12));
  CHECK_THAT(mass, WithinAbs(1.0, 1e-11));
}
