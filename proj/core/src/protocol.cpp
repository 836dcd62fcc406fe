#include "fedtier/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedtier/error.hpp"

namespace fedtier {

void DataProfile::validate() const {
  double sum = 0.0;
  for (double v : label_hist) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("profile entries must be finite and >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvalidArgument("profile histogram sums to " + std::to_string(sum) + ", expected 1");
  }
  if (sample_count < 1) throw InvalidArgument("profile sample_count must be >= 1");
}

DataProfile profile_of(const LabeledSet& data) {
  if (data.empty()) throw InvalidArgument("profile_of: empty dataset");
  std::array<std::uint64_t, kNumClasses> counts{};
  for (int l : data.labels) {
    if (l < 0 || l > 9) throw InvalidArgument("profile_of: label outside [0, 9]");
    ++counts[static_cast<std::size_t>(l)];
  }
  DataProfile p;
  const double n = static_cast<double>(data.size());
  for (std::size_t c = 0; c < kNumClasses; ++c) p.label_hist[c] = static_cast<double>(counts[c]) / n;
  p.sample_count = data.size();
  return p;
}

double profile_similarity(const DataProfile& a, const DataProfile& b) {
  if (a.label_hist == b.label_hist) {
    if (std::all_of(a.label_hist.begin(), a.label_hist.end(), [](double v) { return v == 0.0; })) {
      throw InvalidArgument("profile_similarity: zero-norm histogram");
    }
    return 1.0;
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    ab += a.label_hist[c] * b.label_hist[c];
    aa += a.label_hist[c] * a.label_hist[c];
    bb += b.label_hist[c] * b.label_hist[c];
  }
  if (aa == 0.0 || bb == 0.0) throw InvalidArgument("profile_similarity: zero-norm histogram");
  return std::clamp(ab / std::sqrt(aa * bb), 0.0, 1.0);
}

DataProfile merge_profiles(const DataProfile& a, double wa, const DataProfile& b, double wb) {
  if (!(wa > 0.0) || !(wb > 0.0) || !std::isfinite(wa) || !std::isfinite(wb)) {
    throw InvalidArgument("merge_profiles: weights must be finite and > 0");
  }
  DataProfile out;
  const double total = wa + wb;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out.label_hist[c] = (wa * a.label_hist[c] + wb * b.label_hist[c]) / total;
  }
  out.sample_count = a.sample_count + b.sample_count;
  return out;
}

}  // namespace fedtier
