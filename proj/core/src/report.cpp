#include "fedtier/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fedtier/error.hpp"

namespace fedtier::report {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& dst) {
  if (obj.contains(key)) dst = obj.at(key).get<T>();
}

Topology parse_topology(const std::string& s) {
  if (s == "standard") return Topology::kStandard;
  if (s == "three_tier") return Topology::kThreeTier;
  throw ConfigError("topology must be 'standard' or 'three_tier', got '" + s + "'");
}

Scenario parse_scenario(const std::string& s) {
  if (s == "s1") return Scenario::kS1;
  if (s == "s2") return Scenario::kS2;
  if (s == "custom") return Scenario::kCustom;
  throw ConfigError("scenario must be 's1', 's2' or 'custom', got '" + s + "'");
}

RunConfig parse_config_json(const json& doc) {
  check_keys(doc,
             {"topology", "scenario", "partition", "sparse_per_label", "rounds", "train", "thresholds",
              "seed", "edges", "client_edge", "train_subset", "test_subset", "arch", "mnist_dir"},
             "config");
  RunConfig rc;
  ExperimentConfig& cfg = rc.experiment;
  if (doc.contains("topology")) cfg.topology = parse_topology(doc.at("topology").get<std::string>());
  if (doc.contains("scenario")) cfg.scenario = parse_scenario(doc.at("scenario").get<std::string>());
  if (doc.contains("partition")) {
    for (const auto& c : doc.at("partition")) {
      check_keys(c, {"labels", "max_per_label"}, "partition entry");
      mnist::ClientSpec spec;
      for (int l : c.at("labels").get<std::vector<int>>()) spec.labels.insert(l);
      if (c.contains("max_per_label")) spec.max_per_label = c.at("max_per_label").get<std::size_t>();
      cfg.custom.clients.push_back(std::move(spec));
    }
  }
  if (cfg.scenario == Scenario::kCustom && cfg.custom.clients.empty()) {
    throw ConfigError("scenario 'custom' needs a 'partition' list");
  }
  if (cfg.scenario != Scenario::kCustom && doc.contains("partition")) {
    throw ConfigError("'partition' is only valid with scenario 'custom'");
  }
  read(doc, "sparse_per_label", cfg.sparse_per_label);
  read(doc, "rounds", cfg.rounds);
  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    check_keys(t, {"learning_rate", "momentum", "batch_size", "local_epochs"}, "train");
    read(t, "learning_rate", cfg.train.learning_rate);
    read(t, "momentum", cfg.train.momentum);
    read(t, "batch_size", cfg.train.batch_size);
    read(t, "local_epochs", cfg.train.local_epochs);
  }
  if (doc.contains("thresholds")) {
    const auto& t = doc.at("thresholds");
    check_keys(t, {"match", "match_fedge", "merge", "consolidation_period"}, "thresholds");
    read(t, "match", cfg.thresholds.match);
    read(t, "match_fedge", cfg.thresholds.match_fedge);
    read(t, "merge", cfg.thresholds.merge);
    read(t, "consolidation_period", cfg.thresholds.consolidation_period);
  }
  read(doc, "seed", cfg.seed);
  read(doc, "edges", cfg.edges);
  read(doc, "client_edge", cfg.client_edge);
  if (doc.contains("train_subset")) cfg.train_subset = doc.at("train_subset").get<std::size_t>();
  if (doc.contains("test_subset")) cfg.test_subset = doc.at("test_subset").get<std::size_t>();
  if (doc.contains("arch")) {
    const auto& a = doc.at("arch");
    check_keys(a, {"conv1_channels", "conv2_channels", "hidden_units"}, "arch");
    read(a, "conv1_channels", cfg.arch.conv1_channels);
    read(a, "conv2_channels", cfg.arch.conv2_channels);
    read(a, "hidden_units", cfg.arch.hidden_units);
    if (cfg.arch.conv1_channels < 1 || cfg.arch.conv2_channels < 1 || cfg.arch.hidden_units < 1) {
      throw ConfigError("arch sizes must be >= 1");
    }
  }
  if (doc.contains("mnist_dir")) rc.mnist_dir = doc.at("mnist_dir").get<std::string>();
  cfg.validate();
  return rc;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

std::map<ClientId, double> final_accuracies(const std::vector<MetricsRecord>& records) {
  std::uint64_t last = 0;
  for (const auto& r : records) last = std::max(last, r.round);
  std::map<ClientId, double> out;
  for (const auto& r : records) {
    if (r.round == last) out[r.client_id] = r.accuracy;
  }
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return parse_config_json(doc);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config has a wrongly typed value: ") + e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_text(path)); }

std::string config_to_json(const RunConfig& rc) {
  const ExperimentConfig& cfg = rc.experiment;
  json doc = {
      {"topology", to_string(cfg.topology)},
      {"scenario", to_string(cfg.scenario)},
      {"sparse_per_label", cfg.sparse_per_label},
      {"rounds", cfg.rounds},
      {"train",
       {{"learning_rate", cfg.train.learning_rate},
        {"momentum", cfg.train.momentum},
        {"batch_size", cfg.train.batch_size},
        {"local_epochs", cfg.train.local_epochs}}},
      {"thresholds",
       {{"match", cfg.thresholds.match},
        {"match_fedge", cfg.thresholds.match_fedge},
        {"merge", cfg.thresholds.merge},
        {"consolidation_period", cfg.thresholds.consolidation_period}}},
      {"seed", cfg.seed},
      {"edges", cfg.edges},
      {"client_edge", cfg.client_edge},
      {"arch",
       {{"conv1_channels", cfg.arch.conv1_channels},
        {"conv2_channels", cfg.arch.conv2_channels},
        {"hidden_units", cfg.arch.hidden_units}}},
  };
  if (cfg.scenario == Scenario::kCustom) {
    json parts = json::array();
    for (const auto& c : cfg.custom.clients) {
      json entry = {{"labels", std::vector<int>(c.labels.begin(), c.labels.end())}};
      if (c.max_per_label) entry["max_per_label"] = *c.max_per_label;
      parts.push_back(entry);
    }
    doc["partition"] = parts;
  }
  if (cfg.train_subset) doc["train_subset"] = *cfg.train_subset;
  if (cfg.test_subset) doc["test_subset"] = *cfg.test_subset;
  if (rc.mnist_dir) doc["mnist_dir"] = rc.mnist_dir->string();
  return doc.dump(2) + '\n';
}

int run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  try {
    rc = load_config(options.config_path);
    if (options.seed_override) rc.experiment.seed = *options.seed_override;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  mnist::Mnist data;
  try {
    std::filesystem::path dir;
    if (rc.mnist_dir) {
      dir = *rc.mnist_dir;
    } else if (const char* env = std::getenv(kMnistDirEnv); env != nullptr && *env != '\0') {
      dir = env;
    } else {
      err << "data error: no MNIST directory (set mnist_dir in the config or " << kMnistDirEnv << ")\n";
      return kExitData;
    }
    data = mnist::load_dir(dir);
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }

  const ExperimentConfig& cfg = rc.experiment;
  ExperimentResult result;
  try {
    out << "running " << to_string(cfg.topology) << " / " << to_string(cfg.scenario) << ", "
        << cfg.rounds << " rounds, seed " << cfg.seed << '\n';
    result = run_experiment(cfg, data, [&](std::uint64_t round, const auto&) {
      out << "round " << round << " done" << std::endl;
    });
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const PartitionError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }

  try {
    std::filesystem::create_directories(options.out_dir);
    write_text(options.out_dir / "metrics.csv", metrics_to_csv(result.rounds));
    write_text(options.out_dir / "metrics.json", metrics_to_json(result.rounds));
    const std::string title = (cfg.topology == Topology::kStandard ? "Standard FL" : "Three-tier FL") +
                              std::string(", scenario ") + to_string(cfg.scenario);
    write_text(options.out_dir / "accuracy.svg", accuracy_svg(result.rounds, title));
    export_snapshot(options.out_dir / "models", result.final_models);
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }

  for (const auto& c : result.rounds.back().per_client) {
    out << "client " << c.client_id << " (model " << c.model_id << "): " << pct(c.accuracy) << '\n';
  }
  return kExitOk;
}

int compare(const std::filesystem::path& a, const std::filesystem::path& b, std::ostream& out,
            std::ostream& err) {
  std::vector<MetricsRecord> ra, rb;
  try {
    std::ifstream fa(a), fb(b);
    if (!fa) throw Error("cannot read " + a.string());
    if (!fb) throw Error("cannot read " + b.string());
    ra = parse_metrics_csv(fa);
    rb = parse_metrics_csv(fb);
  } catch (const std::exception& e) {
    err << "compare: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto fa = final_accuracies(ra);
  const auto fb = final_accuracies(rb);
  std::set<ClientId> ca, cb;
  for (const auto& [id, acc] : fa) ca.insert(id);
  for (const auto& [id, acc] : fb) cb.insert(id);
  if (ca != cb || ca.empty()) {
    err << "compare: client sets differ between " << a.string() << " and " << b.string() << '\n';
    return kExitConfig;
  }
  char line[128];
  out << "client      a_final      b_final   diff(b-a)\n";
  for (const auto& [id, acc_a] : fa) {
    const double acc_b = fb.at(id);
    std::snprintf(line, sizeof line, "%6llu  %11.4f  %11.4f  %10.4f\n", static_cast<unsigned long long>(id),
                  acc_a, acc_b, acc_b - acc_a);
    out << line;
  }
  return kExitOk;
}

void list_scenarios(std::ostream& out) {
  out << "s1      three clients, labels {0,1,2} / {3,4,5} / {6,7,8,9}, equal sizes\n"
      << "s2      two clients, all of labels {0,1} vs sparse_per_label images of each of 2..9\n"
      << "custom  clients from a 'partition' list of {labels, max_per_label}\n";
}

}  // namespace fedtier::report
