#include "fedtier/edge.hpp"

#include <string>

#include "fedtier/aggregation.hpp"
#include "fedtier/error.hpp"

namespace fedtier {

EdgeLayer::EdgeLayer(std::uint64_t edge_id, double match_threshold)
    : edge_id_(edge_id), match_threshold_(match_threshold) {
  if (match_threshold < 0.0 || match_threshold > 1.0) {
    throw InvalidArgument("edge match threshold must lie in [0, 1]");
  }
}

ModelResponse EdgeLayer::handle_model_request(const ModelRequest& request,
                                              GlobalModelService& global) {
  request.profile.validate();
  const CachedModel* best = nullptr;
  double best_sim = -1.0;
  for (const auto& [id, entry] : cache_) {
    const double sim = profile_similarity(request.profile, entry.descriptor.profile);
    if (sim > best_sim) {
      best_sim = sim;
      best = &entry;
    }
  }
  if (best != nullptr && best_sim >= match_threshold_) {
    const auto& d = best->descriptor;
    return {d.model_id, best->params, d.version, false, d.profile};
  }

  ModelResponse response = global.find_or_create(request.profile);
  auto& slot = cache_[response.model_id];
  if (slot.params.empty() || slot.descriptor.version <= response.version) {
    slot.descriptor.model_id = response.model_id;
    slot.descriptor.version = response.version;
    slot.descriptor.profile = response.profile;
    slot.params = response.params;
  }
  return response;
}

void EdgeLayer::handle_update(ModelUpdate update) {
  if (!cache_.contains(update.model_id)) {
    throw ProtocolError("edge " + std::to_string(edge_id_) + ": update for unknown model " +
                        std::to_string(update.model_id) + " from client " +
                        std::to_string(update.client_id));
  }
  if (update.sample_count < 1) throw ProtocolError("update with zero samples");
  pending_[update.model_id].push_back(std::move(update));
}

std::vector<EdgeAggregate> EdgeLayer::flush_round(GlobalModelService& global) {
  std::vector<EdgeAggregate> forwarded;
  for (auto& [id, updates] : pending_) {
    std::vector<WeightedParams> inputs;
    double weight = 0.0;
    DataProfile profile = updates.front().profile;
    for (std::size_t i = 0; i < updates.size(); ++i) {
      const double w = static_cast<double>(updates[i].sample_count);
      inputs.push_back({&updates[i].params, w});
      if (i > 0) profile = merge_profiles(profile, weight, updates[i].profile, w);
      weight += w;
    }
    EdgeAggregate aggregate{edge_id_, id, fedavg(inputs), weight, profile};
    forwarded.push_back(aggregate);
    global.submit_aggregate(std::move(aggregate));
  }
  pending_.clear();
  return forwarded;
}

std::size_t EdgeLayer::refresh_cache(GlobalModelService& global) {
  std::size_t fetches = 0;
  for (auto it = cache_.begin(); it != cache_.end();) {
    const auto current = global.describe(it->first);
    if (!current) {
      it = cache_.erase(it);
      continue;
    }
    auto& entry = it->second;
    if (current->version > entry.descriptor.version) {
      ModelResponse fresh = global.fetch(it->first);
      entry.params = std::move(fresh.params);
      ++fetches;
    }
    if (current->version >= entry.descriptor.version) entry.descriptor = *current;
    ++it;
  }
  return fetches;
}

}  // namespace fedtier
