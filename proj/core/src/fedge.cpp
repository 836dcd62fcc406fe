#include "fedtier/fedge.hpp"

#include <fstream>
#include <string>

#include <json.hpp>

#include "fedtier/aggregation.hpp"
#include "fedtier/codec.hpp"
#include "fedtier/error.hpp"

namespace fedtier {

namespace {

ModelResponse response_for(const GlobalModel& m, bool fresh) {
  return {m.descriptor.model_id, m.params, m.descriptor.version, fresh, m.descriptor.profile};
}

}  // namespace

FedgeLayer::FedgeLayer(FedgeConfig cfg) : cfg_(cfg) {
  if (cfg_.match_threshold < 0.0 || cfg_.match_threshold > 1.0 || cfg_.merge_threshold < 0.0 ||
      cfg_.merge_threshold > 1.0) {
    throw InvalidArgument("fedge thresholds must lie in [0, 1]");
  }
}

ModelResponse FedgeLayer::find_or_create(const DataProfile& profile) {
  profile.validate();
  const GlobalModel* best = nullptr;
  double best_sim = -1.0;
  for (const auto& [id, model] : registry_) {
    const double sim = profile_similarity(profile, model.descriptor.profile);
    if (sim > best_sim) {
      best_sim = sim;
      best = &model;
    }
  }
  if (best != nullptr && best_sim >= cfg_.match_threshold) return response_for(*best, false);

  const ModelId id = next_id_++;
  GlobalModel model{{id, 0, profile, 0.0}, init_params(cfg_.arch, cfg_.init_seed_base + id)};
  const auto& stored = registry_.emplace(id, std::move(model)).first->second;
  return response_for(stored, true);
}

void FedgeLayer::submit_aggregate(EdgeAggregate aggregate) {
  if (!registry_.contains(aggregate.model_id)) {
    throw ProtocolError("aggregate for unknown model " + std::to_string(aggregate.model_id));
  }
  aggregate.profile.validate();
  if (!(aggregate.weight > 0.0)) throw ProtocolError("aggregate weight must be > 0");
  staged_[aggregate.model_id].push_back(std::move(aggregate));
}

std::optional<ModelDescriptor> FedgeLayer::describe(ModelId id) const {
  if (const auto* m = lookup(id)) return m->descriptor;
  return std::nullopt;
}

ModelResponse FedgeLayer::fetch(ModelId id) {
  const auto* m = lookup(id);
  if (m == nullptr) throw ProtocolError("fetch of unknown model " + std::to_string(id));
  return response_for(*m, false);
}

std::map<ModelId, std::uint64_t> FedgeLayer::commit_round() {
  std::map<ModelId, std::uint64_t> versions;
  for (auto& [id, aggregates] : staged_) {
    GlobalModel& model = registry_.at(id);
    std::vector<WeightedParams> inputs;
    double weight = 0.0;
    DataProfile incoming = aggregates.front().profile;
    for (std::size_t i = 0; i < aggregates.size(); ++i) {
      inputs.push_back({&aggregates[i].params, aggregates[i].weight});
      if (i > 0) incoming = merge_profiles(incoming, weight, aggregates[i].profile, aggregates[i].weight);
      weight += aggregates[i].weight;
    }
    model.params = fedavg(inputs);
    auto& d = model.descriptor;
    d.profile = d.cumulative_weight > 0.0
                    ? merge_profiles(d.profile, d.cumulative_weight, incoming, weight)
                    : incoming;
    d.cumulative_weight += weight;
    d.version += 1;
    versions[id] = d.version;
  }
  staged_.clear();
  return versions;
}

std::uint64_t FedgeLayer::apply_edge_aggregate(ModelId id, const ModelParams& params, double weight,
                                               const DataProfile& profile) {
  submit_aggregate({0, id, params, weight, profile});
  return commit_round().at(id);
}

bool FedgeLayer::consolidation_due(std::uint64_t round) const noexcept {
  return cfg_.consolidation_period > 0 && round > 0 && round % cfg_.consolidation_period == 0;
}

std::vector<MergeEvent> FedgeLayer::consolidate(std::uint64_t round) {
  if (!consolidation_due(round)) {
    throw InvalidArgument("consolidation is not due in round " + std::to_string(round));
  }
  std::vector<MergeEvent> events;
  for (;;) {
    const GlobalModel* best_a = nullptr;
    const GlobalModel* best_b = nullptr;
    double best_sim = -1.0;
    for (auto a = registry_.begin(); a != registry_.end(); ++a) {
      for (auto b = std::next(a); b != registry_.end(); ++b) {
        const double sim = profile_similarity(a->second.descriptor.profile, b->second.descriptor.profile);
        if (sim > best_sim) {
          best_sim = sim;
          best_a = &a->second;
          best_b = &b->second;
        }
      }
    }
    if (best_a == nullptr || best_sim < cfg_.merge_threshold) break;

    const ModelDescriptor& da = best_a->descriptor;
    const ModelDescriptor& db = best_b->descriptor;
    const double wa = da.cumulative_weight;
    const double wb = db.cumulative_weight;
    GlobalModel merged;
    merged.descriptor.model_id = da.model_id;  // map order: a has the smaller id
    merged.descriptor.version = std::max(da.version, db.version) + 1;
    merged.descriptor.cumulative_weight = wa + wb;
    if (wa > 0.0 && wb > 0.0) {
      merged.params = merge_models(best_a->params, wa, best_b->params, wb);
      merged.descriptor.profile = merge_profiles(da.profile, wa, db.profile, wb);
    } else if (wb > 0.0) {
      // A never-updated model carries no information; the other side wins.
      merged.params = best_b->params;
      merged.descriptor.profile = db.profile;
    } else {
      merged.params = best_a->params;
      merged.descriptor.profile = da.profile;
    }
    const ModelId absorbed = db.model_id;
    const ModelId survivor = da.model_id;
    events.push_back({round, survivor, absorbed, best_sim});
    registry_.erase(absorbed);
    registry_[survivor] = std::move(merged);
    merged_into_[absorbed] = survivor;
  }
  return events;
}

ModelId FedgeLayer::resolve(ModelId id) const {
  for (auto it = merged_into_.find(id); it != merged_into_.end(); it = merged_into_.find(id)) {
    id = it->second;
  }
  return id;
}

const GlobalModel* FedgeLayer::lookup(ModelId id) const {
  const auto it = registry_.find(id);
  return it == registry_.end() ? nullptr : &it->second;
}

void export_snapshot(const std::filesystem::path& dir, const std::map<ModelId, GlobalModel>& models) {
  std::filesystem::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  for (const auto& [id, model] : models) {
    const std::string file = "model_" + std::to_string(id) + ".bin";
    write_params_file(dir / file, model.params);
    const auto& d = model.descriptor;
    index.push_back({{"model_id", d.model_id},
                     {"version", d.version},
                     {"file", file},
                     {"profile", {{"label_hist", d.profile.label_hist},
                                  {"sample_count", d.profile.sample_count}}},
                     {"cumulative_weight", d.cumulative_weight}});
  }
  std::ofstream out(dir / "index.json");
  if (!out) throw Error("cannot write " + (dir / "index.json").string());
  out << index.dump(2) << '\n';
}

}  // namespace fedtier
