#include "fedtier/mnist.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <string>

#include "fedtier/error.hpp"
#include "fedtier/random.hpp"

namespace fedtier::mnist {

namespace {

// Stream tags for derive_seed so the partitioners never share a PRNG sequence.
constexpr std::uint64_t kScenario1Stream = 0x5331;
constexpr std::uint64_t kScenario2Stream = 0x5332;
constexpr std::uint64_t kCustomStream = 0x4355;
constexpr std::uint64_t kSubsampleStream = 0x5355;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxErrc::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex(std::uint32_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s += digits[(v >> shift) & 0xF];
  return s;
}

void require_size(const std::vector<std::uint8_t>& bytes, std::size_t needed,
                  const std::filesystem::path& path) {
  if (bytes.size() < needed) {
    throw IdxError(IdxErrc::kTruncated, path.string() + ": expected at least " +
                                            std::to_string(needed) + " bytes, found " +
                                            std::to_string(bytes.size()));
  }
}

std::array<std::vector<std::size_t>, kNumClasses> rows_by_label(const LabeledSet& set) {
  std::array<std::vector<std::size_t>, kNumClasses> out;
  for (std::size_t i = 0; i < set.size(); ++i) out[static_cast<std::size_t>(set.labels[i])].push_back(i);
  return out;
}

// `count` rows drawn without replacement from `pool`, returned in ascending order.
std::vector<std::size_t> draw(std::vector<std::size_t> pool, std::size_t count, std::uint64_t seed) {
  SplitMix64 rng(seed);
  shuffle(std::span<std::size_t>(pool), rng);
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

LabeledSet load_idx(const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);

  require_size(img, 4, images_path);
  if (const auto magic = read_be32(img, 0); magic != kImagesMagic) {
    throw IdxError(IdxErrc::kBadMagic, images_path.string() + ": bad magic " + hex(magic) +
                                           ", expected " + hex(kImagesMagic));
  }
  require_size(lab, 4, labels_path);
  if (const auto magic = read_be32(lab, 0); magic != kLabelsMagic) {
    throw IdxError(IdxErrc::kBadMagic, labels_path.string() + ": bad magic " + hex(magic) +
                                           ", expected " + hex(kLabelsMagic));
  }
  require_size(img, 16, images_path);
  require_size(lab, 8, labels_path);

  const std::size_t n_images = read_be32(img, 4);
  const std::size_t rows = read_be32(img, 8);
  const std::size_t cols = read_be32(img, 12);
  const std::size_t n_labels = read_be32(lab, 4);
  if (rows != kImageSide || cols != kImageSide) {
    throw IdxError(IdxErrc::kBadDimensions, images_path.string() + ": images are " +
                                                std::to_string(rows) + "x" + std::to_string(cols) +
                                                ", expected 28x28");
  }
  if (n_images != n_labels) {
    throw IdxError(IdxErrc::kCountMismatch, "image count " + std::to_string(n_images) +
                                                " != label count " + std::to_string(n_labels));
  }
  require_size(img, 16 + n_images * kImagePixels, images_path);
  require_size(lab, 8 + n_labels, labels_path);

  LabeledSet out;
  out.labels.resize(n_labels);
  for (std::size_t i = 0; i < n_labels; ++i) {
    const int label = lab[8 + i];
    if (label > 9) {
      throw IdxError(IdxErrc::kBadDimensions,
                     labels_path.string() + ": label " + std::to_string(label) + " at row " +
                         std::to_string(i) + " outside [0, 9]");
    }
    out.labels[i] = label;
  }
  if (n_images == 0) return out;

  // 256-entry lookup keeps every pixel bit-identical to normalize_pixel().
  std::array<double, 256> lut{};
  for (int v = 0; v < 256; ++v) lut[v] = normalize_pixel(static_cast<std::uint8_t>(v));
  std::vector<double> pixels(n_images * kImagePixels);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = lut[img[16 + i]];
  out.images = Tensor({n_images, 1, kImageSide, kImageSide}, std::move(pixels));
  return out;
}

Mnist load_dir(const std::filesystem::path& dir) {
  return {load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte"),
          load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte")};
}

void PartitionSpec::validate() const {
  if (clients.empty()) throw InvalidArgument("partition needs at least one client");
  for (std::size_t c = 0; c < clients.size(); ++c) {
    const auto& spec = clients[c];
    if (spec.labels.empty()) {
      throw InvalidArgument("client " + std::to_string(c + 1) + " has an empty label set");
    }
    for (int l : spec.labels) {
      if (l < 0 || l > 9) throw InvalidArgument("label " + std::to_string(l) + " outside [0, 9]");
    }
    if (spec.max_per_label && *spec.max_per_label == 0) {
      throw InvalidArgument("max_per_label must be >= 1");
    }
  }
}

std::vector<LabeledSet> partition_scenario1(const LabeledSet& train, std::uint64_t seed) {
  static const std::array<LabelSet, 3> kGroups = {LabelSet{0, 1, 2}, LabelSet{3, 4, 5},
                                                  LabelSet{6, 7, 8, 9}};
  const auto by_label = rows_by_label(train);
  std::array<std::vector<std::size_t>, 3> pools;
  for (std::size_t c = 0; c < kGroups.size(); ++c) {
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (kGroups[c].contains(train.labels[i])) pools[c].push_back(i);
    }
    for (int l : kGroups[c]) {
      if (by_label[static_cast<std::size_t>(l)].empty()) {
        throw PartitionError("scenario 1 needs every label; label " + std::to_string(l) +
                             " has no training rows");
      }
    }
  }
  std::size_t equal = pools[0].size();
  for (const auto& p : pools) equal = std::min(equal, p.size());

  std::vector<LabeledSet> out;
  for (std::size_t c = 0; c < pools.size(); ++c) {
    const auto rows = draw(pools[c], equal, derive_seed(seed, kScenario1Stream, c));
    out.push_back(train.select(rows));
  }
  return out;
}

std::vector<LabeledSet> partition_scenario2(const LabeledSet& train, std::size_t sparse_per_label,
                                            std::uint64_t seed) {
  if (sparse_per_label < 1) throw InvalidArgument("sparse_per_label must be >= 1");
  const auto by_label = rows_by_label(train);

  std::vector<std::size_t> dense;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train.labels[i] <= 1) dense.push_back(i);
  }
  if (by_label[0].empty() || by_label[1].empty()) {
    throw PartitionError("scenario 2 needs training rows for labels 0 and 1");
  }

  std::vector<std::size_t> sparse;
  for (std::size_t l = 2; l < kNumClasses; ++l) {
    if (by_label[l].size() < sparse_per_label) {
      throw PartitionError("label " + std::to_string(l) + " has " +
                           std::to_string(by_label[l].size()) + " rows, " +
                           std::to_string(sparse_per_label) + " requested");
    }
    const auto rows = draw(by_label[l], sparse_per_label, derive_seed(seed, kScenario2Stream, l));
    sparse.insert(sparse.end(), rows.begin(), rows.end());
  }
  std::sort(sparse.begin(), sparse.end());

  std::vector<LabeledSet> out;
  out.push_back(train.select(dense));
  out.push_back(train.select(sparse));
  return out;
}

std::vector<LabeledSet> partition(const LabeledSet& train, const PartitionSpec& spec,
                                  std::uint64_t seed) {
  spec.validate();
  const auto by_label = rows_by_label(train);
  std::vector<std::vector<std::size_t>> rows(spec.clients.size());

  for (std::size_t l = 0; l < kNumClasses; ++l) {
    std::vector<std::size_t> fixed, free;
    std::size_t fixed_total = 0;
    for (std::size_t c = 0; c < spec.clients.size(); ++c) {
      if (!spec.clients[c].labels.contains(static_cast<int>(l))) continue;
      if (spec.clients[c].max_per_label) {
        fixed.push_back(c);
        fixed_total += *spec.clients[c].max_per_label;
      } else {
        free.push_back(c);
      }
    }
    if (fixed.empty() && free.empty()) continue;
    const auto& pool_src = by_label[l];
    if (fixed_total > pool_src.size()) {
      throw PartitionError("label " + std::to_string(l) + " has " + std::to_string(pool_src.size()) +
                           " rows, " + std::to_string(fixed_total) + " requested");
    }
    std::vector<std::size_t> pool = pool_src;
    SplitMix64 rng(derive_seed(seed, kCustomStream, l));
    shuffle(std::span<std::size_t>(pool), rng);

    std::size_t cursor = 0;
    for (std::size_t c : fixed) {
      const std::size_t take = *spec.clients[c].max_per_label;
      rows[c].insert(rows[c].end(), pool.begin() + cursor, pool.begin() + cursor + take);
      cursor += take;
    }
    if (!free.empty()) {
      const std::size_t share = (pool.size() - cursor) / free.size();
      if (share == 0) {
        throw PartitionError("label " + std::to_string(l) + " has no rows left for client " +
                             std::to_string(free.front() + 1));
      }
      for (std::size_t c : free) {
        rows[c].insert(rows[c].end(), pool.begin() + cursor, pool.begin() + cursor + share);
        cursor += share;
      }
    }
  }

  std::vector<LabeledSet> out;
  for (auto& r : rows) {
    std::sort(r.begin(), r.end());
    out.push_back(train.select(r));
  }
  return out;
}

LabeledSet filter_test(const LabeledSet& test, const LabelSet& labels) {
  if (labels.empty()) throw InvalidArgument("filter_test: empty label set");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (labels.contains(test.labels[i])) rows.push_back(i);
  }
  if (rows.empty()) throw InvalidArgument("filter_test: no test rows carry the requested labels");
  return test.select(rows);
}

LabeledSet subsample(const LabeledSet& set, std::size_t n, std::uint64_t seed) {
  if (n >= set.size()) return set;
  std::vector<std::size_t> all(set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return set.select(draw(std::move(all), n, derive_seed(seed, kSubsampleStream, n)));
}

LabelSet labels_present(const LabeledSet& set) {
  return LabelSet(set.labels.begin(), set.labels.end());
}

}  // namespace fedtier::mnist
