#pragma once

#include <string>
#include <vector>

#include "epikit/io.hpp"
#include "epikit/transforms.hpp"

namespace epikit {

/// One forecasting run: dataset → transforms → split → fit → evaluate.
struct ForecastConfig {
    std::string data = "toy";  // "toy" or a dataset file path
    std::string model = "ar";
    WindowSpec window;
    ForecasterOptions options;
    /// Applied in order; see parse_transforms.
    std::vector<std::string> transforms;
    SeedPolicy seed;

    void validate() const;
    Json to_json() const;
};

/// Builds a pipeline from specs such as "zscore", "minmax", "frequency",
/// "time_embedding:8" and "normalize_adjacency". Errors name "transforms[i]".
TransformPipeline parse_transforms(const std::vector<std::string>& specs);

/// Returns the report {task, model, metrics, config, seed}.
Json run_forecast(const ForecastConfig& cfg);

struct DetectConfig {
    std::string cases = "synthetic-trees";  // or a cases/snapshot file path
    std::string detector = "rumor";         // jordan | rumor | montecarlo | all
    std::size_t count = 50;
    std::size_t nodes = 60;
    std::size_t infected = 15;
    std::size_t replicates = 50;  // Monte Carlo only
    double beta = 1.0;
    double gamma = 0.0;
    SeedPolicy seed;

    void validate() const;
    Json to_json() const;
};

const std::vector<std::string>& detector_names();

/// With detector "all" the metrics object holds one section per detector.
Json run_detect(const DetectConfig& cfg);

struct SimulateConfig {
    std::string model = "sir";  // sir | sis | seir | network-sir | scenario
    double beta = 0.3;
    double gamma = 0.1;
    double sigma = 0.2;
    // compartmental
    double population = 1000.0;
    double i0 = 1.0;
    double e0 = 0.0;
    double horizon = 160.0;
    double dt = 0.1;
    // network-sir and scenario
    std::string graph;  // graph JSON file; empty = random graph
    std::size_t nodes = 100;
    double edge_prob = 0.05;
    std::size_t steps = 100;
    std::vector<NodeId> initial_infected{0};
    double step_dt = 1.0;
    double base_flow = 1.0;
    double distance_decay = 2.0;
    std::size_t period = 7;
    SeedPolicy seed;

    void validate() const;
    Json to_json() const;
};

struct SimulationOutput {
    EpiDataset dataset;
    Json metadata;          // {task, model, config, seed}
    std::string curve_csv;  // aggregate compartment counts over time
};

SimulationOutput run_simulate(const SimulateConfig& cfg);

}  // namespace epikit
