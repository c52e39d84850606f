// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "gdres/error.hpp"
#include "gdres/tensor.hpp"

namespace gdres {

/// Images with class labels in [0, num_classes).
struct LabeledSet {
  std::vector<Tensor> images;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }

  void validate() const {
    detail::require_shape(images.size() == labels.size(), "dataset: one label per image");
    for (int l : labels)
      if (l < 0 || l >= num_classes) throw InvalidArgument("dataset: label out of range");
  }

  /// Subset in the order of `idx`.
  LabeledSet select(const std::vector<std::size_t>& idx) const {
    LabeledSet s;
    s.num_classes = num_classes;
    for (std::size_t i : idx) {
      s.images.push_back(images.at(i));
      s.labels.push_back(labels.at(i));
    }
    return s;
  }
};

}  // namespace gdres
