#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedtier/fedge.hpp"
#include "fedtier/metrics.hpp"
#include "fedtier/mnist.hpp"
#include "fedtier/nn.hpp"

namespace fedtier {

enum class Topology { kStandard, kThreeTier };
enum class Scenario { kS1, kS2, kCustom };

std::string to_string(Topology t);
std::string to_string(Scenario s);

struct Thresholds {
  double match = 0.5;        ///< edge cache match
  double match_fedge = 0.5;  ///< fedge registry match
  double merge = 0.9;
  std::uint64_t consolidation_period = 5;  ///< 0 disables consolidation
};

struct ExperimentConfig {
  Topology topology = Topology::kThreeTier;
  Scenario scenario = Scenario::kS1;
  mnist::PartitionSpec custom;          ///< used when scenario == kCustom
  std::size_t sparse_per_label = 125;   ///< scenario 2, client 2
  std::size_t rounds = 10;
  TrainConfig train;                    ///< train.seed is ignored; see client_seed()
  Thresholds thresholds;
  std::uint64_t seed = 1;
  std::size_t edges = 1;
  /// client index -> edge index; empty assigns client i to edge i % edges.
  std::vector<std::size_t> client_edge;
  /// Optional seeded subsets of the train/test files, applied before partitioning.
  std::optional<std::size_t> train_subset;
  std::optional<std::size_t> test_subset;
  SimpleCnnArch arch = SimpleCnnArch::standard();

  /// Throws ConfigError.
  void validate() const;
};

/// seed XOR hash(client_id, round): a client's training seed never depends on
/// the order clients are visited in.
std::uint64_t client_seed(std::uint64_t seed, ClientId client, std::uint64_t round);

struct Client {
  ClientId id = 0;  ///< 1-based
  LabeledSet train;
  LabeledSet eval;  ///< test rows restricted to the labels in `train`
  DataProfile profile;
};

/// Applies subsets, partitions the training data and builds per-client
/// evaluation sets.
std::vector<Client> prepare_clients(const ExperimentConfig& cfg, const mnist::Mnist& data);

/// Called after each round with the global parameters in effect (standard
/// topology: {0: global}; three-tier: the whole registry).
using RoundObserver =
    std::function<void(std::uint64_t round, const std::map<ModelId, ModelParams>& globals)>;

struct ExperimentResult {
  std::vector<RoundMetrics> rounds;
  std::vector<MergeEvent> merges;
  std::map<ModelId, GlobalModel> final_models;
  std::size_t encoded_model_size = 0;
};

ExperimentResult run_standard_fl(const ExperimentConfig& cfg, const mnist::Mnist& data,
                                 const RoundObserver& observer = {});
ExperimentResult run_three_tier(const ExperimentConfig& cfg, const mnist::Mnist& data,
                                const RoundObserver& observer = {});
/// Dispatches on cfg.topology.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const mnist::Mnist& data,
                                const RoundObserver& observer = {});

/// Runs both configs and compares their serialized metrics byte for byte.
/// Configs with different topologies are rejected (ConfigError).
bool replay_check(const ExperimentConfig& a, const ExperimentConfig& b, const mnist::Mnist& data);
inline bool replay_check(const ExperimentConfig& cfg, const mnist::Mnist& data) {
  return replay_check(cfg, cfg, data);
}

}  // namespace fedtier
