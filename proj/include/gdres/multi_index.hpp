// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "gdres/error.hpp"

namespace gdres {

/// Derivative order (a1, a2) along (x1, x2).
struct MultiIndex {
  int a1 = 0;
  int a2 = 0;

  constexpr int total_order() const noexcept { return a1 + a2; }

  /// |alpha|! / (a1! a2!), the binomial coefficient C(|alpha|, a1) in 2-D.
  constexpr std::int64_t multinomial() const noexcept {
    std::int64_t r = 1;
    const int n = total_order();
    for (int i = 1; i <= a1; ++i) r = r * (n - a1 + i) / i;
    return r;
  }

  std::string str() const { return "(" + std::to_string(a1) + "," + std::to_string(a2) + ")"; }

  friend constexpr bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

inline std::int64_t multinomial_factor(const MultiIndex& alpha) {
  if (alpha.a1 < 0 || alpha.a2 < 0) throw InvalidArgument("multinomial_factor: negative index");
  return alpha.multinomial();
}

/// Multi-indices of an N-jet: increasing total order, then decreasing a1.
/// With `include_zero_order` the index (0,0) comes first.
inline std::vector<MultiIndex> jet_index_set(int max_order, bool include_zero_order) {
  if (max_order < 1) throw InvalidArgument("jet_index_set: max_order must be at least 1");
  if (max_order > 3) throw InvalidArgument("jet_index_set: unsupported order above 3");
  std::vector<MultiIndex> out;
  if (include_zero_order) out.push_back({0, 0});
  for (int n = 1; n <= max_order; ++n)
    for (int a1 = n; a1 >= 0; --a1) out.push_back({a1, n - a1});
  return out;
}

}  // namespace gdres
