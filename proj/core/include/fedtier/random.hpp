#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace fedtier {

/// SplitMix64 (Steele, Lea & Flood 2014): state advances by the golden-ratio
/// increment 0x9E3779B97F4A7C15 and each output is the state passed through
/// the mix64 finalizer below. Every draw used by the library (initialization,
/// shuffles, subsampling) goes through this generator, so replays are
/// byte-identical on any platform with IEEE-754 doubles.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  constexpr double uniform01() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  constexpr double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform01();
  }

  /// Unbiased integer on [0, bound) by rejection; bound must be > 0.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t r = next();
    while (r >= limit) r = next();
    return r % bound;
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// In-place Fisher-Yates shuffle (from the back) driven by SplitMix64.
template <typename T>
void shuffle(std::span<T> items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  shuffle(std::span<std::size_t>(idx), rng);
  return idx;
}

/// seed XOR mix64(mix64(a) + b). Used for per-(client, round) training seeds
/// and for independent sub-streams (partitioning, subsetting).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b) noexcept {
  return seed ^ SplitMix64::mix(SplitMix64::mix(a) + b);
}

}  // namespace fedtier
