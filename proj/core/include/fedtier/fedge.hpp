#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "fedtier/nn.hpp"
#include "fedtier/protocol.hpp"

namespace fedtier {

struct GlobalModel {
  ModelDescriptor descriptor;
  ModelParams params;
};

/// Writes model_<id>.bin (codec format) per model plus an index.json listing
/// model_id, version, file, profile and cumulative_weight.
void export_snapshot(const std::filesystem::path& dir, const std::map<ModelId, GlobalModel>& models);

/// One edge's pre-aggregated contribution to a global model for a round.
struct EdgeAggregate {
  std::uint64_t edge_id = 0;
  ModelId model_id = 0;
  ModelParams params;
  double weight = 0.0;  ///< total samples behind `params`
  DataProfile profile;  ///< merged profile of the contributing clients
};

struct MergeEvent {
  std::uint64_t round = 0;
  ModelId survivor = 0;
  ModelId absorbed = 0;
  double similarity = 0.0;
};

/// What an edge may ask of the global tier. Every call that returns or takes
/// ModelParams is one model transfer between the two tiers.
class GlobalModelService {
 public:
  virtual ~GlobalModelService() = default;

  virtual ModelResponse find_or_create(const DataProfile& profile) = 0;
  /// Stages an aggregate for the current round; ProtocolError for unknown ids.
  virtual void submit_aggregate(EdgeAggregate aggregate) = 0;
  /// Metadata only; nullopt once the model has been merged away.
  virtual std::optional<ModelDescriptor> describe(ModelId id) const = 0;
  /// Current parameters of a live model; ProtocolError for unknown ids.
  virtual ModelResponse fetch(ModelId id) = 0;
};

struct FedgeConfig {
  double match_threshold = 0.5;
  double merge_threshold = 0.9;
  /// Consolidate after every `consolidation_period`-th round; 0 disables.
  std::uint64_t consolidation_period = 5;
  SimpleCnnArch arch = SimpleCnnArch::standard();
  /// Model k is initialized with init_params(arch, init_seed_base + k).
  std::uint64_t init_seed_base = 0;
};

/// Registry of global models. Single owner; not thread-safe.
class FedgeLayer final : public GlobalModelService {
 public:
  explicit FedgeLayer(FedgeConfig cfg);

  /// Best match by profile similarity (ties to the lowest id) if it reaches
  /// the match threshold, otherwise a freshly initialized model registered
  /// under the next id with version 0 and the requester's profile.
  ModelResponse find_or_create(const DataProfile& profile) override;
  void submit_aggregate(EdgeAggregate aggregate) override;
  std::optional<ModelDescriptor> describe(ModelId id) const override;
  ModelResponse fetch(ModelId id) override;

  /// Applies every staged aggregate. Per model: staged contributions are
  /// combined by fedavg over edge weights and replace the stored params;
  /// version += 1; profile = merge_profiles(old, cumulative_weight, incoming,
  /// weight) (just `incoming` while cumulative_weight is 0); cumulative_weight
  /// += weight. Returns the new version of each touched model.
  std::map<ModelId, std::uint64_t> commit_round();

  /// submit_aggregate + commit_round for a single contribution.
  std::uint64_t apply_edge_aggregate(ModelId id, const ModelParams& params, double weight,
                                     const DataProfile& profile);

  bool consolidation_due(std::uint64_t round) const noexcept;

  /// Greedy merging of global models whose profile similarity reaches the
  /// merge threshold, most similar pair first (ties to the lowest id pair).
  /// Survivor keeps the smaller id; params are merge_models weighted by
  /// cumulative weight; version = max + 1. Requires consolidation_due(round).
  std::vector<MergeEvent> consolidate(std::uint64_t round);

  /// Follows merge history to the id that now holds `id`'s parameters.
  ModelId resolve(ModelId id) const;

  const GlobalModel* lookup(ModelId id) const;
  const std::map<ModelId, GlobalModel>& registry() const noexcept { return registry_; }
  std::size_t size() const noexcept { return registry_.size(); }
  const FedgeConfig& config() const noexcept { return cfg_; }

  void export_snapshot(const std::filesystem::path& dir) const { fedtier::export_snapshot(dir, registry_); }

 private:
  FedgeConfig cfg_;
  std::map<ModelId, GlobalModel> registry_;
  std::map<ModelId, ModelId> merged_into_;
  std::map<ModelId, std::vector<EdgeAggregate>> staged_;
  ModelId next_id_ = 0;
};

}  // namespace fedtier
