#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "fedtier/fedge.hpp"
#include "fedtier/protocol.hpp"

namespace fedtier {

struct CachedModel {
  ModelDescriptor descriptor;
  ModelParams params;
};

/// Coordinator between a group of clients and the global tier: serves model
/// requests from a local cache, escalates misses, and pre-aggregates client
/// updates per model before forwarding them. Single owner; not thread-safe.
class EdgeLayer {
 public:
  explicit EdgeLayer(std::uint64_t edge_id, double match_threshold = 0.5);

  /// Cache hit when some cached profile reaches the match threshold (best
  /// similarity wins, ties to the lowest id); otherwise one find_or_create
  /// call on `global`, whose answer is cached.
  ModelResponse handle_model_request(const ModelRequest& request, GlobalModelService& global);

  /// Queues an update; ProtocolError if the model was never served here.
  void handle_update(ModelUpdate update);

  /// For each pending model: fedavg of the queued updates weighted by sample
  /// count, submitted to `global` with the summed weight and merged profile.
  /// Clears the queue and returns what was forwarded, in model id order.
  std::vector<EdgeAggregate> flush_round(GlobalModelService& global);

  /// Brings cached entries up to the global tier's versions and drops models
  /// that no longer exist there. Returns the number of parameter fetches.
  std::size_t refresh_cache(GlobalModelService& global);

  std::uint64_t edge_id() const noexcept { return edge_id_; }
  double match_threshold() const noexcept { return match_threshold_; }
  const std::map<ModelId, CachedModel>& cache() const noexcept { return cache_; }
  const std::map<ModelId, std::vector<ModelUpdate>>& pending() const noexcept { return pending_; }

 private:
  std::uint64_t edge_id_;
  double match_threshold_;
  std::map<ModelId, CachedModel> cache_;
  std::map<ModelId, std::vector<ModelUpdate>> pending_;
};

}  // namespace fedtier
