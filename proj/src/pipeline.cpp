#include "epikit/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "epikit/error.hpp"
#include "epikit/mechanistic.hpp"
#include "epikit/network_sir.hpp"
#include "epikit/simulate.hpp"
#include "epikit/transforms.hpp"

namespace epikit {

namespace {

std::string format_real(double x) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

Json read_json_file(const std::string& path, const std::string& field) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::NotFound, "cannot open '" + path + "'", field);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Parse, "'" + path + "' is not valid JSON: " + e.what(), field);
    }
}

}  // namespace

// ---------------------------------------------------------------- forecast

void ForecastConfig::validate() const {
    window.validate();
    require(!data.empty(), "data must be 'toy' or a dataset path", "data");
    (void)parse_transforms(transforms);
    (void)make_forecaster(model, options);
}

Json ForecastConfig::to_json() const {
    return Json{{"data", data},
                {"model", model},
                {"lookback", window.lookback},
                {"horizon", window.horizon},
                {"ar_order", options.ar_order},
                {"differencing", options.differencing},
                {"period", options.period},
                {"population", options.mechanistic.population},
                {"transforms", transforms}};
}

TransformPipeline parse_transforms(const std::vector<std::string>& specs) {
    TransformPipeline pipeline;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const std::string field = "transforms[" + std::to_string(i) + "]";
        const std::string& spec = specs[i];
        const auto colon = spec.find(':');
        const std::string name = spec.substr(0, colon);
        const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
        if (name == "zscore" || name == "minmax") {
            require(arg.empty(), name + " takes no argument", field);
            pipeline.feature_transforms.push_back(
                normalize_features_transform(name == "zscore" ? NormalizationMode::ZScore : NormalizationMode::MinMax));
        } else if (name == "frequency") {
            require(arg.empty(), "frequency takes no argument", field);
            pipeline.feature_transforms.push_back(to_frequency_transform());
        } else if (name == "time_embedding") {
            std::size_t dims = 0;
            try {
                std::size_t used = 0;
                dims = std::stoul(arg, &used);
                if (used != arg.size()) throw std::invalid_argument(arg);
            } catch (const std::exception&) {
                fail(ErrorKind::InvalidArgument, "time_embedding needs an even dimension, e.g. time_embedding:8", field);
            }
            require(dims >= 2 && dims % 2 == 0, "time_embedding dimension must be even and >= 2", field);
            pipeline.feature_transforms.push_back(time_embedding_transform(dims));
        } else if (name == "normalize_adjacency") {
            require(arg.empty(), "normalize_adjacency takes no argument", field);
            pipeline.graph_transforms.push_back(normalize_adjacency_transform());
        } else {
            fail(ErrorKind::InvalidArgument,
                 "unknown transform '" + name + "' (available: zscore, minmax, frequency, time_embedding:D, normalize_adjacency)",
                 field);
        }
    }
    return pipeline;
}

Json run_forecast(const ForecastConfig& cfg) {
    cfg.validate();
    EpiDataset ds = cfg.data == "toy" ? generate_toy_dataset(cfg.seed) : load_dataset(cfg.data);

    ds = apply_pipeline(parse_transforms(cfg.transforms), ds);

    auto model = make_forecaster(cfg.model, cfg.options);
    const ForecastReport report = evaluate_forecaster(*model, ds, cfg.window);
    return make_report("forecast", cfg.model, forecast_report_to_json(report), cfg.to_json(), cfg.seed);
}

// ------------------------------------------------------------------ detect

const std::vector<std::string>& detector_names() {
    static const std::vector<std::string> names{"jordan", "rumor", "montecarlo"};
    return names;
}

void DetectConfig::validate() const {
    const auto& names = detector_names();
    if (detector != "all" && std::find(names.begin(), names.end(), detector) == names.end())
        fail(ErrorKind::InvalidArgument, "unknown detector '" + detector + "' (available: jordan, rumor, montecarlo, all)",
             "detector");
    require(!cases.empty(), "cases must be 'synthetic-trees' or a file path", "cases");
    if (cases == "synthetic-trees") {
        require(count >= 1, "count must be >= 1", "count");
        require(nodes >= 2, "nodes must be >= 2", "nodes");
        require(infected >= 1 && infected <= nodes, "infected must be in [1, nodes]", "infected");
    }
    if (detector == "montecarlo" || detector == "all") {
        require(replicates >= 1, "replicates must be >= 1", "replicates");
        require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and >= 0", "beta");
        require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be finite and >= 0", "gamma");
    }
}

Json DetectConfig::to_json() const {
    return Json{{"cases", cases},     {"detector", detector},     {"count", count}, {"nodes", nodes},
                {"infected", infected}, {"replicates", replicates}, {"beta", beta},   {"gamma", gamma}};
}

Json run_detect(const DetectConfig& cfg) {
    cfg.validate();
    const std::vector<DetectionCase> cases = cfg.cases == "synthetic-trees"
                                                 ? synthetic_tree_cases(cfg.count, cfg.nodes, cfg.infected, cfg.seed)
                                                 : load_cases(cfg.cases);

    auto make_detector = [&](const std::string& name) -> Detector {
        if (name == "jordan") return jordan_center;
        if (name == "rumor") return rumor_centrality;
        NetworkSirConfig sir;
        sir.beta = cfg.beta;
        sir.gamma = cfg.gamma;
        sir.dt = 1.0;
        const SeedPolicy mc_seed = derive_stream(cfg.seed, 1);
        return [sir, mc_seed, replicates = cfg.replicates](const Snapshot& s) {
            return monte_carlo_source(s, sir, replicates, mc_seed);
        };
    };

    Json metrics;
    if (cfg.detector == "all") {
        metrics = Json::object();
        for (const auto& name : detector_names())
            metrics[name] = detection_report_to_json(evaluate_detector(make_detector(name), cases));
    } else {
        metrics = detection_report_to_json(evaluate_detector(make_detector(cfg.detector), cases));
    }
    return make_report("detect", cfg.detector, std::move(metrics), cfg.to_json(), cfg.seed);
}

// ---------------------------------------------------------------- simulate

void SimulateConfig::validate() const {
    static const std::vector<std::string> models{"sir", "sis", "seir", "network-sir", "scenario"};
    if (std::find(models.begin(), models.end(), model) == models.end())
        fail(ErrorKind::InvalidArgument, "unknown simulator '" + model + "' (available: sir, sis, seir, network-sir, scenario)",
             "model");
    require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and >= 0", "beta");
    require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be finite and >= 0", "gamma");
    require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be finite and >= 0", "sigma");
    if (model == "sir" || model == "sis" || model == "seir") {
        require(std::isfinite(population) && population > 0.0, "n must be > 0", "n");
        require(i0 >= 0.0 && e0 >= 0.0 && i0 + e0 <= population, "i0 + e0 must be in [0, n]", "i0");
        require(std::isfinite(horizon) && horizon > 0.0, "horizon must be > 0", "horizon");
        require(std::isfinite(dt) && dt > 0.0, "dt must be > 0", "dt");
    } else {
        require(std::isfinite(step_dt) && step_dt > 0.0, "step-dt must be > 0", "step_dt");
        require(steps >= 1, "steps must be >= 1", "steps");
        if (graph.empty()) {
            require(nodes >= 1, "nodes must be >= 1", "nodes");
            require(edge_prob >= 0.0 && edge_prob <= 1.0, "edge-prob must be in [0, 1]", "edge_prob");
        }
        if (model == "scenario") require(period >= 1, "period must be >= 1", "period");
    }
}

Json SimulateConfig::to_json() const {
    Json j{{"model", model}, {"beta", beta}, {"gamma", gamma}};
    if (model == "sir" || model == "sis" || model == "seir") {
        j.update(Json{{"n", population}, {"i0", i0}, {"horizon", horizon}, {"dt", dt}});
        if (model == "seir") j.update(Json{{"sigma", sigma}, {"e0", e0}});
    } else {
        j.update(Json{{"graph", graph},
                      {"nodes", nodes},
                      {"edge_prob", edge_prob},
                      {"steps", steps},
                      {"step_dt", step_dt},
                      {"initial_infected", initial_infected}});
        if (model == "scenario") j.update(Json{{"base_flow", base_flow}, {"distance_decay", distance_decay}, {"period", period}});
    }
    return j;
}

namespace {

SimulationOutput compartmental(const SimulateConfig& cfg) {
    CompartmentParams p{cfg.beta, cfg.gamma, cfg.sigma, cfg.population};
    CompartmentTrajectory traj;
    if (cfg.model == "sir") traj = simulate_sir(p, cfg.population - cfg.i0, cfg.i0, 0.0, cfg.horizon, cfg.dt);
    else if (cfg.model == "sis") traj = simulate_sis(p, cfg.population - cfg.i0, cfg.i0, cfg.horizon, cfg.dt);
    else traj = simulate_seir(p, cfg.population - cfg.i0 - cfg.e0, cfg.e0, cfg.i0, 0.0, cfg.horizon, cfg.dt);

    const std::size_t cols = traj.compartments.size();
    PanelBuilder panel(traj.size(), 1, cols);
    std::string csv = "t";
    for (Compartment c : traj.compartments) csv += "," + std::string(to_string(c));
    csv += "\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        csv += format_real(traj.times[k]);
        for (std::size_t c = 0; c < cols; ++c) {
            panel(k, 0, c) = traj.counts[c][k];
            csv += "," + format_real(traj.counts[c][k]);
        }
        csv += "\n";
    }
    SimulationOutput out;
    out.dataset = EpiDataset(std::move(panel).build(), std::nullopt, std::nullopt, std::nullopt);
    out.curve_csv = std::move(csv);
    return out;
}

std::string state_curve(const NodeStates& states) {
    std::string csv = "step,S,I,R\n";
    for (std::size_t t = 0; t < states.n_steps(); ++t) {
        csv += std::to_string(t) + "," + std::to_string(states.count(t, Compartment::S)) + "," +
               std::to_string(states.count(t, Compartment::I)) + "," + std::to_string(states.count(t, Compartment::R)) +
               "\n";
    }
    return csv;
}

FeaturePanel infection_features(const NodeStates& states) {
    PanelBuilder panel(states.n_steps(), states.n_nodes(), 2);
    for (std::size_t t = 0; t < states.n_steps(); ++t) {
        for (std::size_t v = 0; v < states.n_nodes(); ++v) {
            const bool infected = states.at(t, v) == Compartment::I;
            panel(t, v, 0) = infected ? 1.0 : 0.0;
            panel(t, v, 1) = infected && (t == 0 || states.at(t - 1, v) == Compartment::S) ? 1.0 : 0.0;
        }
    }
    return std::move(panel).build();
}

StaticGraph load_graph(const std::string& path) {
    const Json j = read_json_file(path, "graph");
    if (j.is_object() && j.contains("static_graph")) return graph_from_json(j["static_graph"], "static_graph");
    return graph_from_json(j, "graph");
}

SimulationOutput network(const SimulateConfig& cfg) {
    const StaticGraph g = cfg.graph.empty() ? random_graph(cfg.nodes, cfg.edge_prob, derive_stream(cfg.seed, 0))
                                            : load_graph(cfg.graph);
    NetworkSirConfig sir;
    sir.beta = cfg.beta;
    sir.gamma = cfg.gamma;
    sir.dt = cfg.step_dt;
    sir.initial_infected = cfg.initial_infected;

    SimulationOutput out;
    if (cfg.model == "network-sir") {
        NodeStates states = simulate_network_sir(g, sir, cfg.steps, derive_stream(cfg.seed, 2));
        out.curve_csv = state_curve(states);
        FeaturePanel features = infection_features(states);
        out.dataset = EpiDataset(std::move(features), std::move(states), g, std::nullopt);
        return out;
    }
    MobilityConfig mob;
    mob.n_regions = g.n_nodes();
    mob.base_flow = cfg.base_flow;
    mob.distance_decay = cfg.distance_decay;
    mob.daily_period = cfg.period;
    mob.positions = random_positions(g.n_nodes(), derive_stream(cfg.seed, 1));
    Scenario sc = simulate_scenario(mob, sir, cfg.steps, derive_stream(cfg.seed, 2), g);
    out.curve_csv = state_curve(sc.states);
    out.dataset = EpiDataset(std::move(sc.panel), std::move(sc.states), g, std::move(sc.graph));
    return out;
}

}  // namespace

SimulationOutput run_simulate(const SimulateConfig& cfg) {
    cfg.validate();
    SimulationOutput out = (cfg.model == "sir" || cfg.model == "sis" || cfg.model == "seir") ? compartmental(cfg)
                                                                                              : network(cfg);
    out.metadata = Json{{"task", "simulate"}, {"model", cfg.model}, {"config", cfg.to_json()},
                        {"seed", Json{{"master_seed", cfg.seed.master_seed}, {"stream_id", cfg.seed.stream_id}}}};
    return out;
}

}  // namespace epikit
