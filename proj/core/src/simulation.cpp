#include "fedtier/simulation.hpp"

#include <utility>

#include "fedtier/aggregation.hpp"
#include "fedtier/codec.hpp"
#include "fedtier/edge.hpp"
#include "fedtier/error.hpp"
#include "fedtier/random.hpp"

namespace fedtier {

namespace {

constexpr std::uint64_t kPartitionStream = 0x50415254;  // "PART"
constexpr std::uint64_t kSubsetStream = 0x53554253;     // "SUBS"

// Every model that crosses a tier boundary is encoded and decoded, so byte
// counts are exactly what the codec produced.
ModelParams carry(const ModelParams& params, const SimpleCnnArch& arch, std::uint64_t& counter) {
  const Bytes bytes = encode_params(params);
  counter += bytes.size();
  return decode_params(bytes, arch);
}

// Edge-to-fedge link that meters model transfers in both directions.
class MeteredLink final : public GlobalModelService {
 public:
  MeteredLink(FedgeLayer& fedge, std::uint64_t& down, std::uint64_t& up)
      : fedge_(fedge), down_(down), up_(up) {}

  ModelResponse find_or_create(const DataProfile& profile) override {
    ModelResponse r = fedge_.find_or_create(profile);
    r.params = carry(r.params, fedge_.config().arch, down_);
    return r;
  }
  void submit_aggregate(EdgeAggregate aggregate) override {
    aggregate.params = carry(aggregate.params, fedge_.config().arch, up_);
    fedge_.submit_aggregate(std::move(aggregate));
  }
  std::optional<ModelDescriptor> describe(ModelId id) const override { return fedge_.describe(id); }
  ModelResponse fetch(ModelId id) override {
    ModelResponse r = fedge_.fetch(id);
    r.params = carry(r.params, fedge_.config().arch, down_);
    return r;
  }

 private:
  FedgeLayer& fedge_;
  std::uint64_t& down_;
  std::uint64_t& up_;
};

TrainConfig seeded(const ExperimentConfig& cfg, ClientId client, std::uint64_t round) {
  TrainConfig t = cfg.train;
  t.seed = client_seed(cfg.seed, client, round);
  return t;
}

std::size_t edge_of(const ExperimentConfig& cfg, std::size_t client_index) {
  return cfg.client_edge.empty() ? client_index % cfg.edges : cfg.client_edge[client_index];
}

}  // namespace

std::string to_string(Topology t) {
  return t == Topology::kStandard ? "standard" : "three_tier";
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::kS1: return "s1";
    case Scenario::kS2: return "s2";
    case Scenario::kCustom: return "custom";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (edges < 1) throw ConfigError("edges must be >= 1");
  for (std::size_t e : client_edge) {
    if (e >= edges) throw ConfigError("client_edge entry " + std::to_string(e) + " >= edges");
  }
  for (double t : {thresholds.match, thresholds.match_fedge, thresholds.merge}) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("thresholds must lie in [0, 1]");
  }
  if (sparse_per_label < 1) throw ConfigError("sparse_per_label must be >= 1");
  if (train_subset && *train_subset == 0) throw ConfigError("train_subset must be >= 1");
  if (test_subset && *test_subset == 0) throw ConfigError("test_subset must be >= 1");
  try {
    train.validate();
    if (scenario == Scenario::kCustom) custom.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

std::uint64_t client_seed(std::uint64_t seed, ClientId client, std::uint64_t round) {
  return derive_seed(seed, client, round);
}

std::vector<Client> prepare_clients(const ExperimentConfig& cfg, const mnist::Mnist& data) {
  cfg.validate();
  const LabeledSet train = cfg.train_subset
                               ? mnist::subsample(data.train, *cfg.train_subset,
                                                  derive_seed(cfg.seed, kSubsetStream, 0))
                               : data.train;
  const LabeledSet test = cfg.test_subset ? mnist::subsample(data.test, *cfg.test_subset,
                                                             derive_seed(cfg.seed, kSubsetStream, 1))
                                          : data.test;
  const std::uint64_t part_seed = derive_seed(cfg.seed, kPartitionStream, 0);
  std::vector<LabeledSet> parts;
  switch (cfg.scenario) {
    case Scenario::kS1: parts = mnist::partition_scenario1(train, part_seed); break;
    case Scenario::kS2: parts = mnist::partition_scenario2(train, cfg.sparse_per_label, part_seed); break;
    case Scenario::kCustom: parts = mnist::partition(train, cfg.custom, part_seed); break;
  }
  if (!cfg.client_edge.empty() && cfg.client_edge.size() != parts.size()) {
    throw ConfigError("client_edge lists " + std::to_string(cfg.client_edge.size()) +
                      " clients, scenario has " + std::to_string(parts.size()));
  }

  std::vector<Client> clients;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].empty()) throw PartitionError("client " + std::to_string(i + 1) + " received no data");
    Client c;
    c.id = i + 1;
    c.profile = profile_of(parts[i]);
    c.eval = mnist::filter_test(test, mnist::labels_present(parts[i]));
    c.train = std::move(parts[i]);
    clients.push_back(std::move(c));
  }
  return clients;
}

ExperimentResult run_standard_fl(const ExperimentConfig& cfg, const mnist::Mnist& data,
                                 const RoundObserver& observer) {
  const auto clients = prepare_clients(cfg, data);
  const SimpleCnnArch& arch = cfg.arch;
  ExperimentResult result;
  result.encoded_model_size = encoded_size(arch);

  // Same seed the three-tier registry uses for its first model.
  ModelParams global = init_params(arch, cfg.seed);
  for (std::uint64_t round = 1; round <= cfg.rounds; ++round) {
    RoundMetrics metrics;
    metrics.round = round;
    std::vector<ModelParams> trained;
    std::vector<double> weights;
    for (const auto& c : clients) {
      ModelParams local = carry(global, arch, metrics.bytes_down);
      auto out = train_local(std::move(local), c.train, seeded(cfg, c.id, round));
      trained.push_back(carry(out.params, arch, metrics.bytes_up));
      weights.push_back(static_cast<double>(out.sample_count));
    }
    std::vector<WeightedParams> inputs;
    for (std::size_t i = 0; i < trained.size(); ++i) inputs.push_back({&trained[i], weights[i]});
    global = fedavg(inputs);

    if (observer) observer(round, {{0, global}});
    for (const auto& c : clients) {
      metrics.per_client.push_back({c.id, 0, evaluate_accuracy(global, c.eval)});
    }
    metrics.registry_size = 1;
    result.rounds.push_back(std::move(metrics));
  }
  DataProfile profile = clients.front().profile;
  double weight = static_cast<double>(profile.sample_count);
  for (std::size_t i = 1; i < clients.size(); ++i) {
    const double wi = static_cast<double>(clients[i].profile.sample_count);
    profile = merge_profiles(profile, weight, clients[i].profile, wi);
    weight += wi;
  }
  const double cumulative = weight * static_cast<double>(cfg.rounds);
  result.final_models[0] = GlobalModel{{0, cfg.rounds, profile, cumulative}, std::move(global)};
  return result;
}

ExperimentResult run_three_tier(const ExperimentConfig& cfg, const mnist::Mnist& data,
                                const RoundObserver& observer) {
  const auto clients = prepare_clients(cfg, data);
  const SimpleCnnArch& arch = cfg.arch;
  ExperimentResult result;
  result.encoded_model_size = encoded_size(arch);

  FedgeLayer fedge({cfg.thresholds.match_fedge, cfg.thresholds.merge,
                    cfg.thresholds.consolidation_period, arch, cfg.seed});
  std::vector<EdgeLayer> edges;
  for (std::size_t e = 0; e < cfg.edges; ++e) edges.emplace_back(e, cfg.thresholds.match);
  std::vector<ModelId> assigned(clients.size(), 0);

  for (std::uint64_t round = 1; round <= cfg.rounds; ++round) {
    RoundMetrics metrics;
    metrics.round = round;
    std::vector<MeteredLink> links;
    for (std::size_t e = 0; e < edges.size(); ++e) links.emplace_back(fedge, metrics.bytes_down, metrics.bytes_up);

    for (std::size_t i = 0; i < clients.size(); ++i) {
      const Client& c = clients[i];
      const std::size_t e = edge_of(cfg, i);
      ModelResponse resp = edges[e].handle_model_request({c.id, c.profile, round}, links[e]);
      ModelParams local = carry(resp.params, arch, metrics.bytes_down);
      assigned[i] = resp.model_id;
      auto out = train_local(std::move(local), c.train, seeded(cfg, c.id, round));
      ModelUpdate update{resp.model_id, carry(out.params, arch, metrics.bytes_up), out.sample_count,
                         c.profile, c.id, round};
      edges[e].handle_update(std::move(update));
    }
    for (std::size_t e = 0; e < edges.size(); ++e) edges[e].flush_round(links[e]);
    fedge.commit_round();
    if (fedge.consolidation_due(round)) {
      auto merges = fedge.consolidate(round);
      result.merges.insert(result.merges.end(), merges.begin(), merges.end());
    }
    for (std::size_t e = 0; e < edges.size(); ++e) edges[e].refresh_cache(links[e]);

    if (observer) {
      std::map<ModelId, ModelParams> globals;
      for (const auto& [id, m] : fedge.registry()) globals.emplace(id, m.params);
      observer(round, globals);
    }
    for (std::size_t i = 0; i < clients.size(); ++i) {
      const ModelId id = fedge.resolve(assigned[i]);
      const GlobalModel* model = fedge.lookup(id);
      if (model == nullptr) throw ProtocolError("client " + std::to_string(clients[i].id) + " lost its model");
      metrics.per_client.push_back({clients[i].id, id, evaluate_accuracy(model->params, clients[i].eval)});
    }
    metrics.registry_size = fedge.size();
    result.rounds.push_back(std::move(metrics));
  }
  result.final_models = fedge.registry();
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const mnist::Mnist& data,
                                const RoundObserver& observer) {
  return cfg.topology == Topology::kStandard ? run_standard_fl(cfg, data, observer)
                                             : run_three_tier(cfg, data, observer);
}

bool replay_check(const ExperimentConfig& a, const ExperimentConfig& b, const mnist::Mnist& data) {
  if (a.topology != b.topology) {
    throw ConfigError("replay_check: topology " + to_string(a.topology) + " vs " + to_string(b.topology));
  }
  const std::string first = metrics_to_csv(run_experiment(a, data).rounds);
  const std::string second = metrics_to_csv(run_experiment(b, data).rounds);
  return first == second;
}

}  // namespace fedtier
