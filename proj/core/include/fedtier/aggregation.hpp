#pragma once

#include <span>

#include "fedtier/tensor.hpp"

namespace fedtier {

struct WeightedParams {
  const ModelParams* params;
  double weight;
};

/// Elementwise sum(w_i * v_i) / sum(w_i), accumulated in list order. A single
/// input is returned as a bitwise copy. Throws AggregationError (kEmpty,
/// kLayoutMismatch, kNonPositiveWeight).
ModelParams fedavg(std::span<const WeightedParams> updates);

/// fedavg over {(a, wa), (b, wb)}.
ModelParams merge_models(const ModelParams& a, double wa, const ModelParams& b, double wb);

}  // namespace fedtier
