// SPDX-License-Identifier: Apache-2.0
//
// Scale-normalised derivative responses of a blob at scale sigma, matched
// against the blob rescaled by 2 at scale 2 sigma. The discrepancy comes
// from the difference stencils and shrinks as sigma grows.
#include <cstdio>

#include "gdres/covariance.hpp"

int main() {
  using namespace gdres;
  const int n = 65;
  std::printf("sigma  blob  ");
  for (const MultiIndex& a : jet_index_set(2, false)) std::printf("%9s", a.str().c_str());
  std::printf("\n");
  for (double sigma : {1.0, 1.5, 2.0, 3.0, 4.0, 6.0}) {
    const double blob = 2.0 * sigma;
    const Tensor f1 = render_gaussian_blob(n, blob);
    const Tensor f2 = render_gaussian_blob(2 * (n - 1) + 1, 2.0 * blob);
    std::printf("%5.1f  %4.1f  ", sigma, blob);
    for (const MultiIndex& a : jet_index_set(2, false)) {
      const Tensor r1 = gauss_der_response(f1, a, sigma, 1e-10);
      const Tensor r2 = gauss_der_response(f2, a, 2.0 * sigma, 1e-10);
      std::printf("%9.2e", matched_relative_linf(r1, r2, 2, n / 4));
    }
    std::printf("\n");
  }
}
