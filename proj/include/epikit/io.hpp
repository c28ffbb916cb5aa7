#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "epikit/detect.hpp"
#include "epikit/forecast.hpp"
#include "epikit/rng.hpp"
#include "epikit/types.hpp"

namespace epikit {

using Json = nlohmann::json;

inline constexpr const char* kDatasetVersion = "epikit.dataset/1";
inline constexpr const char* kCasesVersion = "epikit.cases/1";

Json graph_to_json(const StaticGraph& g);
/// `where` prefixes field paths in errors (e.g. "static_graph").
StaticGraph graph_from_json(const Json& j, const std::string& where);

Json dataset_to_json(const EpiDataset& ds, const Json& metadata = Json::object());
EpiDataset dataset_from_json(const Json& j);

/// Writes the dataset atomically (temporary file + rename).
void save_dataset(const EpiDataset& ds, const std::filesystem::path& path, const Json& metadata = Json::object());
EpiDataset load_dataset(const std::filesystem::path& path);

/// Dataset metadata map stored alongside the arrays (empty when absent).
Json load_dataset_metadata(const std::filesystem::path& path);

/// Serialized form used by save_dataset; reals use shortest round-trip form.
std::string serialize_dataset(const EpiDataset& ds, const Json& metadata = Json::object());

Json snapshot_to_json(const Snapshot& s);
Snapshot snapshot_from_json(const Json& j, const std::string& where = "snapshot");

Json cases_to_json(const std::vector<DetectionCase>& cases);
/// Accepts either a cases document or a single snapshot (whose optional
/// "true_source" becomes the case label, defaulting to node 0).
std::vector<DetectionCase> cases_from_json(const Json& j);
std::vector<DetectionCase> load_cases(const std::filesystem::path& path);

Json metrics_to_json(const MetricSet& m);
Json forecast_report_to_json(const ForecastReport& r);
Json detection_report_to_json(const DetectionReport& r);

/// Report envelope {task, model, metrics, config, seed}.
Json make_report(const std::string& task, const std::string& model, Json metrics, Json config, const SeedPolicy& seed);

/// 47-node Erdős–Rényi contact graph (p = 0.1) and 120 steps of
/// mobility-weighted NetworkSIR along its edges; features are the infected
/// indicator, the new-infection indicator and a noisy case count
/// max(0, 10·infected + 2·ε), ε ~ N(0, 1). Split (0.7, 0.1).
EpiDataset generate_toy_dataset(const SeedPolicy& seed);

/// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace epikit
