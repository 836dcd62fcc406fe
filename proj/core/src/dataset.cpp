#include "fedtier/dataset.hpp"

#include <algorithm>
#include <string>

#include "fedtier/error.hpp"

namespace fedtier {

LabeledSet LabeledSet::select(std::span<const std::size_t> indices) const {
  LabeledSet out;
  if (indices.empty()) return out;
  std::vector<double> pixels;
  pixels.reserve(indices.size() * kImagePixels);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw InvalidArgument("row index " + std::to_string(i) + " out of range");
    const auto img = image(i);
    pixels.insert(pixels.end(), img.begin(), img.end());
    out.labels.push_back(labels[i]);
  }
  out.images = Tensor({indices.size(), 1, kImageSide, kImageSide}, std::move(pixels));
  return out;
}

void LabeledSet::validate() const {
  if (labels.empty()) {
    if (images.size() != 0) throw InvalidArgument("empty label list with non-empty images");
    return;
  }
  const Shape expected{labels.size(), 1, kImageSide, kImageSide};
  if (images.shape() != expected) {
    throw InvalidArgument("images shape " + to_string(images.shape()) + " does not match " +
                          to_string(expected));
  }
  if (std::any_of(labels.begin(), labels.end(), [](int l) { return l < 0 || l > 9; })) {
    throw InvalidArgument("label outside [0, 9]");
  }
  if (!images.all_finite()) throw InvalidArgument("non-finite pixel value");
}

}  // namespace fedtier
