#pragma once

#include <array>
#include <cstdint>

#include "fedtier/dataset.hpp"
#include "fedtier/tensor.hpp"

namespace fedtier {

using ModelId = std::uint64_t;
using ClientId = std::uint64_t;

/// Normalized label histogram plus sample count. This is the only client
/// metadata that leaves a client; it drives every model match.
struct DataProfile {
  std::array<double, kNumClasses> label_hist{};
  std::uint64_t sample_count = 0;

  /// Throws InvalidArgument unless entries >= 0, sum = 1 +- 1e-9, count >= 1.
  void validate() const;

  friend bool operator==(const DataProfile&, const DataProfile&) = default;
};

DataProfile profile_of(const LabeledSet& data);

/// Cosine similarity of the two histograms, clamped to [0, 1]. Exactly 1.0
/// for bitwise-equal histograms.
double profile_similarity(const DataProfile& a, const DataProfile& b);

/// hist = (wa*a + wb*b) / (wa + wb); sample_count = a.count + b.count.
DataProfile merge_profiles(const DataProfile& a, double wa, const DataProfile& b, double wb);

struct ModelDescriptor {
  ModelId model_id = 0;
  std::uint64_t version = 0;
  DataProfile profile;
  double cumulative_weight = 0.0;

  friend bool operator==(const ModelDescriptor&, const ModelDescriptor&) = default;
};

struct ModelRequest {
  ClientId client_id = 0;
  DataProfile profile;
  std::uint64_t round = 0;
};

struct ModelResponse {
  ModelId model_id = 0;
  ModelParams params;
  std::uint64_t version = 0;
  bool freshly_created = false;
  DataProfile profile;  ///< the model's stored profile, used by edge caches
};

struct ModelUpdate {
  ModelId model_id = 0;
  ModelParams params;
  std::uint64_t sample_count = 0;
  DataProfile profile;
  ClientId client_id = 0;
  std::uint64_t round = 0;
};

}  // namespace fedtier
