#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "fedtier/simulation.hpp"

namespace fedtier::report {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

inline constexpr const char* kMnistDirEnv = "FEDTIER_MNIST_DIR";

struct RunConfig {
  ExperimentConfig experiment;
  std::optional<std::filesystem::path> mnist_dir;
};

/// JSON object mirroring ExperimentConfig; unknown keys at any level are
/// rejected. Throws ConfigError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg);

struct RunOptions {
  std::filesystem::path config_path;
  std::filesystem::path out_dir = "results";
  std::optional<std::uint64_t> seed_override;
};

/// Loads config and MNIST, runs the experiment, writes metrics.csv,
/// metrics.json, accuracy.svg (and models/ for the registry) into out_dir.
/// Returns kExitOk / kExitConfig / kExitData / kExitRuntime; failures print a
/// one-line diagnostic on `err`.
int run(const RunOptions& options, std::ostream& out, std::ostream& err);

/// Final-round accuracy per client for two metrics.csv files and their
/// difference (b - a). Mismatched client sets or malformed files -> kExitConfig.
int compare(const std::filesystem::path& a, const std::filesystem::path& b, std::ostream& out,
            std::ostream& err);

void list_scenarios(std::ostream& out);

}  // namespace fedtier::report
