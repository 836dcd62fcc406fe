#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedtier/tensor.hpp"

namespace fedtier {

inline constexpr std::size_t kNumClasses = 10;
inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

/// Images as an N x 1 x 28 x 28 tensor plus one label in [0, 9] per image.
/// An empty set keeps an empty (rank-0) image tensor.
struct LabeledSet {
  Tensor images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }

  std::span<const double> image(std::size_t i) const {
    return images.values().subspan(i * kImagePixels, kImagePixels);
  }

  /// Rows `indices` in the given order.
  LabeledSet select(std::span<const std::size_t> indices) const;
  /// Throws InvalidArgument on label or shape inconsistencies.
  void validate() const;
};

}  // namespace fedtier
