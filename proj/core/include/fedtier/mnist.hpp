#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <vector>

#include "fedtier/dataset.hpp"

namespace fedtier::mnist {

inline constexpr std::uint32_t kImagesMagic = 0x00000803;
inline constexpr std::uint32_t kLabelsMagic = 0x00000801;
inline constexpr double kMean = 0.1307;
inline constexpr double kStd = 0.3081;

inline constexpr double normalize_pixel(std::uint8_t raw) {
  return (static_cast<double>(raw) / 255.0 - kMean) / kStd;
}
inline constexpr double denormalize(double v) { return v * kStd + kMean; }

/// Reads an IDX3 image file and IDX1 label file (big-endian headers).
/// Throws IdxError with kIo, kBadMagic, kTruncated, kCountMismatch or kBadDimensions.
LabeledSet load_idx(const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path);

struct Mnist {
  LabeledSet train;
  LabeledSet test;
};

/// Loads train-{images-idx3,labels-idx1}-ubyte and t10k-* from `dir`.
Mnist load_dir(const std::filesystem::path& dir);

using LabelSet = std::set<int>;

struct ClientSpec {
  LabelSet labels;
  std::optional<std::size_t> max_per_label;
};

/// Custom partition. For every label the matching train rows are shuffled
/// once; clients requesting the label draw disjoint consecutive chunks of
/// that pool in client order. A client with max_per_label takes exactly that
/// many; clients without one split what remains equally (floor).
struct PartitionSpec {
  std::vector<ClientSpec> clients;

  void validate() const;
};

/// Labels {0,1,2} / {3,4,5} / {6,7,8,9}; each client subsampled without
/// replacement to the size of the smallest group.
std::vector<LabeledSet> partition_scenario1(const LabeledSet& train, std::uint64_t seed);

/// Client 1: every row labelled 0 or 1. Client 2: `sparse_per_label` rows of
/// each label 2..9.
std::vector<LabeledSet> partition_scenario2(const LabeledSet& train, std::size_t sparse_per_label,
                                            std::uint64_t seed);

std::vector<LabeledSet> partition(const LabeledSet& train, const PartitionSpec& spec,
                                  std::uint64_t seed);

/// Rows whose label is in `labels`, original order kept. Empty result is an error.
LabeledSet filter_test(const LabeledSet& test, const LabelSet& labels);

/// Seeded subsample of `n` rows (original order kept); n >= size returns a copy.
LabeledSet subsample(const LabeledSet& set, std::size_t n, std::uint64_t seed);

LabelSet labels_present(const LabeledSet& set);

}  // namespace fedtier::mnist
