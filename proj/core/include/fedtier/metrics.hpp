#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedtier/protocol.hpp"

namespace fedtier {

struct ClientAccuracy {
  ClientId client_id = 0;
  ModelId model_id = 0;
  double accuracy = 0.0;

  friend bool operator==(const ClientAccuracy&, const ClientAccuracy&) = default;
};

struct RoundMetrics {
  std::uint64_t round = 0;  ///< 1-based
  std::vector<ClientAccuracy> per_client;
  std::uint64_t bytes_down = 0;
  std::uint64_t bytes_up = 0;
  std::uint64_t registry_size = 0;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

/// Flat record: one row per (round, client).
struct MetricsRecord {
  std::uint64_t round = 0;
  ClientId client_id = 0;
  ModelId model_id = 0;
  double accuracy = 0.0;
  std::uint64_t bytes_down = 0;
  std::uint64_t bytes_up = 0;
  std::uint64_t registry_size = 0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline constexpr const char* kMetricsCsvHeader =
    "round,client_id,model_id,accuracy,bytes_down,bytes_up,registry_size";

std::vector<MetricsRecord> flatten(const std::vector<RoundMetrics>& rounds);

/// Accuracy is printed with 17 significant digits so the CSV round-trips.
std::string metrics_to_csv(const std::vector<RoundMetrics>& rounds);
std::string metrics_to_json(const std::vector<RoundMetrics>& rounds);
/// Throws Error on a missing/incorrect header or malformed row.
std::vector<MetricsRecord> parse_metrics_csv(std::istream& in);
std::vector<MetricsRecord> parse_metrics_json(const std::string& text);

/// Round vs accuracy, one polyline per client, legend by client id.
std::string accuracy_svg(const std::vector<RoundMetrics>& rounds, const std::string& title);

}  // namespace fedtier
