#include "fedtier/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedtier/error.hpp"

namespace fedtier {

ModelParams fedavg(std::span<const WeightedParams> updates) {
  if (updates.empty()) throw AggregationError(AggregationErrc::kEmpty, "fedavg: no updates");
  const ModelParams& first = *updates.front().params;
  double total = 0.0;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const auto& u = updates[i];
    if (!(u.weight > 0.0) || !std::isfinite(u.weight)) {
      throw AggregationError(AggregationErrc::kNonPositiveWeight,
                             "fedavg: update " + std::to_string(i) + " has weight " +
                                 std::to_string(u.weight));
    }
    if (!first.same_layout(*u.params)) {
      throw AggregationError(AggregationErrc::kLayoutMismatch,
                             "fedavg: update " + std::to_string(i) + " has a different layout");
    }
    total += u.weight;
  }
  if (updates.size() == 1) return first;

  ModelParams out = first.zeros_like();
  for (const auto& u : updates) {
    for (std::size_t t = 0; t < out.size(); ++t) {
      double* acc = out[t].tensor.data();
      const double* v = (*u.params)[t].tensor.data();
      const std::size_t n = out[t].tensor.size();
      for (std::size_t k = 0; k < n; ++k) acc[k] += u.weight * v[k];
    }
  }
  // Rounding can leave a mean one ulp outside the inputs; clamp to the hull.
  for (std::size_t t = 0; t < out.size(); ++t) {
    double* acc = out[t].tensor.data();
    const std::size_t n = out[t].tensor.size();
    for (std::size_t k = 0; k < n; ++k) {
      double lo = (*updates[0].params)[t].tensor[k];
      double hi = lo;
      for (std::size_t i = 1; i < updates.size(); ++i) {
        const double v = (*updates[i].params)[t].tensor[k];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      acc[k] = std::clamp(acc[k] / total, lo, hi);
    }
  }
  return out;
}

ModelParams merge_models(const ModelParams& a, double wa, const ModelParams& b, double wb) {
  const WeightedParams pair[] = {{&a, wa}, {&b, wb}};
  return fedavg(pair);
}

}  // namespace fedtier
