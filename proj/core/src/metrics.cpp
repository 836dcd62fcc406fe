#include "fedtier/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fedtier/error.hpp"

namespace fedtier {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::uint64_t parse_u64(const std::string& s, std::size_t line_no) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error("metrics line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw Error("metrics line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<MetricsRecord> flatten(const std::vector<RoundMetrics>& rounds) {
  std::vector<MetricsRecord> out;
  for (const auto& r : rounds) {
    for (const auto& c : r.per_client) {
      out.push_back({r.round, c.client_id, c.model_id, c.accuracy, r.bytes_down, r.bytes_up,
                     r.registry_size});
    }
  }
  return out;
}

std::string metrics_to_csv(const std::vector<RoundMetrics>& rounds) {
  std::string out = kMetricsCsvHeader;
  out += '\n';
  for (const auto& r : flatten(rounds)) {
    out += std::to_string(r.round) + ',' + std::to_string(r.client_id) + ',' +
           std::to_string(r.model_id) + ',' + format_double(r.accuracy) + ',' +
           std::to_string(r.bytes_down) + ',' + std::to_string(r.bytes_up) + ',' +
           std::to_string(r.registry_size) + '\n';
  }
  return out;
}

std::string metrics_to_json(const std::vector<RoundMetrics>& rounds) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : flatten(rounds)) {
    records.push_back({{"round", r.round},
                       {"client_id", r.client_id},
                       {"model_id", r.model_id},
                       {"accuracy", r.accuracy},
                       {"bytes_down", r.bytes_down},
                       {"bytes_up", r.bytes_up},
                       {"registry_size", r.registry_size}});
  }
  return records.dump(2) + '\n';
}

std::vector<MetricsRecord> parse_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("metrics csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsCsvHeader) throw Error("metrics csv header mismatch: '" + line + "'");
  std::vector<MetricsRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) {
      throw Error("metrics line " + std::to_string(line_no) + ": expected 7 fields, got " +
                  std::to_string(f.size()));
    }
    out.push_back({parse_u64(f[0], line_no), parse_u64(f[1], line_no), parse_u64(f[2], line_no),
                   parse_double(f[3], line_no), parse_u64(f[4], line_no), parse_u64(f[5], line_no),
                   parse_u64(f[6], line_no)});
  }
  return out;
}

std::vector<MetricsRecord> parse_metrics_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  std::vector<MetricsRecord> out;
  for (const auto& r : doc) {
    out.push_back({r.at("round").get<std::uint64_t>(), r.at("client_id").get<std::uint64_t>(),
                   r.at("model_id").get<std::uint64_t>(), r.at("accuracy").get<double>(),
                   r.at("bytes_down").get<std::uint64_t>(), r.at("bytes_up").get<std::uint64_t>(),
                   r.at("registry_size").get<std::uint64_t>()});
  }
  return out;
}

std::string accuracy_svg(const std::vector<RoundMetrics>& rounds, const std::string& title) {
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 60, kRight = 130, kTop = 40, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  std::map<ClientId, std::vector<std::pair<std::uint64_t, double>>> series;
  std::uint64_t max_round = 1;
  for (const auto& r : rounds) {
    max_round = std::max(max_round, r.round);
    for (const auto& c : r.per_client) series[c.client_id].emplace_back(r.round, c.accuracy);
  }
  const auto x_of = [&](double round) {
    return max_round == 1 ? kLeft + plot_w / 2 : kLeft + (round - 1) / double(max_round - 1) * plot_w;
  };
  const auto y_of = [&](double acc) { return kTop + (1.0 - acc) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">"
      << title << "</text>\n";
  for (int i = 0; i <= 10; ++i) {
    const double acc = i / 10.0;
    const double y = y_of(acc);
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << fixed(y, 2) << "\" x2=\"" << kLeft + plot_w
        << "\" y2=\"" << fixed(y, 2) << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << fixed(y + 4, 2)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(acc, 1)
        << "</text>\n";
  }
  for (std::uint64_t r = 1; r <= max_round; ++r) {
    const double x = x_of(static_cast<double>(r));
    svg << "<text x=\"" << fixed(x, 2) << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << r << "</text>\n";
  }
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">round</text>\n";
  svg << "<text x=\"16\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 16 "
      << kTop + plot_h / 2 << ")\">accuracy</text>\n";

  std::size_t idx = 0;
  for (const auto& [client, points] : series) {
    const char* color = kColors[idx % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (i) svg << ' ';
      svg << fixed(x_of(static_cast<double>(points[i].first)), 2) << ',' << fixed(y_of(points[i].second), 2);
    }
    svg << "\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(idx);
    svg << "<line x1=\"" << kLeft + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + plot_w + 36
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kLeft + plot_w + 42 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">client " << client << "</text>\n";
    ++idx;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace fedtier
