#include "epikit/cli.hpp"

#include <csignal>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epikit/error.hpp"
#include "epikit/pipeline.hpp"
#include "epikit/service.hpp"

namespace epikit {

namespace {

const std::set<std::string> kSubcommands{"simulate", "forecast", "detect", "serve"};

std::string scalar_arg(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        std::ostringstream s;
        s.precision(17);
        s << v.get<double>();
        return s.str();
    }
    return v.dump();
}

/// Turns a config object into flags: {"edge_prob": 0.1} → --edge-prob 0.1.
/// Booleans become bare flags, arrays comma-joined values, and a nested
/// seed object expands to --seed/--stream.
std::vector<std::string> config_args(const Json& cfg, const std::string& path) {
    if (!cfg.is_object()) fail(ErrorKind::InvalidArgument, "config file '" + path + "' must hold a JSON object", "config");
    std::vector<std::string> args;
    for (const auto& [key, value] : cfg.items()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (key == "seed" && value.is_object()) {
            if (value.contains("master_seed")) args.insert(args.end(), {"--seed", scalar_arg(value["master_seed"])});
            if (value.contains("stream_id")) args.insert(args.end(), {"--stream", scalar_arg(value["stream_id"])});
        } else if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back(flag);
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& item : value) joined += (joined.empty() ? "" : ",") + scalar_arg(item);
            args.insert(args.end(), {flag, joined});
        } else if (value.is_null()) {
            continue;
        } else {
            args.insert(args.end(), {flag, scalar_arg(value)});
        }
    }
    return args;
}

/// argv with --config removed and the file's flags spliced in right after the
/// subcommand, so explicit flags (which come later) take precedence.
std::vector<std::string> expand_config(int argc, const char* const* argv) {
    std::vector<std::string> rest;
    std::string config_path;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config") {
            if (i + 1 >= argc) fail(ErrorKind::InvalidArgument, "--config needs a file path", "config");
            config_path = argv[++i];
        } else if (a.rfind("--config=", 0) == 0) {
            config_path = a.substr(9);
        } else {
            rest.push_back(a);
        }
    }
    if (config_path.empty()) return rest;

    std::ifstream in(config_path);
    if (!in) fail(ErrorKind::InvalidArgument, "cannot open config file '" + config_path + "'", "config");
    Json cfg;
    try {
        cfg = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::InvalidArgument, "config file '" + config_path + "' is not valid JSON: " + e.what(), "config");
    }
    auto sub = std::find_if(rest.begin(), rest.end(), [](const std::string& a) { return kSubcommands.count(a) != 0; });
    if (sub == rest.end()) fail(ErrorKind::InvalidArgument, "--config needs a subcommand", "config");
    const auto extra = config_args(cfg, config_path);
    rest.insert(sub + 1, extra.begin(), extra.end());
    return rest;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<NodeId> parse_node_list(const std::string& s) {
    std::vector<NodeId> out;
    for (const std::string& item : split_list(s)) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(item, &used);
            if (used != item.size() || item[0] == '-' || v > std::numeric_limits<NodeId>::max()) throw std::invalid_argument(item);
            out.push_back(static_cast<NodeId>(v));
        } catch (const std::exception&) {
            fail(ErrorKind::InvalidArgument, "'" + item + "' is not a node id", "initial_infected");
        }
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    namespace fs = std::filesystem;
    std::error_code ec;
    const auto st = fs::symlink_status(path, ec);
    if (fs::exists(st) && !fs::is_regular_file(st)) {
        // symlinks, devices and pipes (e.g. /dev/stdout) are written in place;
        // a rename would replace the link or node itself
        std::ofstream f(path, std::ios::binary);
        if (!f || !(f << text) || !f.flush()) fail(ErrorKind::Runtime, "cannot write '" + path + "'", "out");
        return;
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) fail(ErrorKind::Runtime, "cannot write '" + path + "'", "out");
        f << text;
        if (!f.flush()) fail(ErrorKind::Runtime, "write to '" + path + "' failed", "out");
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(ErrorKind::Runtime, "cannot write '" + path + "': " + ec.message(), "out");
    }
}

void emit_report(const Json& report, const std::string& out_path, std::ostream& out) {
    const std::string text = report.dump(2) + "\n";
    if (out_path.empty()) out << text;
    else write_text(out_path, text);
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument:
        case ErrorKind::Shape: return 2;
        default: return 1;
    }
}

int serve(const std::string& address, std::uint16_t port, std::ostream& err) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);  // inherited by server threads

    service::HttpServer server(std::make_shared<service::SessionManager>(), address, port);
    const std::uint16_t bound = server.start();
    err << "listening on " << address << ":" << bound << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    err << "shutting down" << std::endl;
    server.stop();
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"epikit: epidemic simulation, forecasting and source detection"};
    app.name("epikit");
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_version_flag("--version", std::string("epikit 0.1.0"));
    app.footer("Flags may also come from --config FILE (JSON, keys named like the flags); explicit flags win.");

    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", master_seed, "Master seed")->envname("EPIKIT_SEED");
        sub->add_option("--stream", stream_id, "Stream id");
    };
    std::string out_path;

    // simulate
    SimulateConfig sim;
    std::string initial = "0";
    std::string curve_path;
    auto* simulate = app.add_subcommand("simulate", "Run a simulator and write a dataset file");
    simulate->add_option("model,--model", sim.model, "sir | sis | seir | network-sir | scenario")->required();
    simulate->add_option("--beta", sim.beta, "Transmission rate");
    simulate->add_option("--gamma", sim.gamma, "Recovery rate");
    simulate->add_option("--sigma", sim.sigma, "Incubation rate (seir)");
    simulate->add_option("--n", sim.population, "Population (compartmental)");
    simulate->add_option("--i0", sim.i0, "Initial infected (compartmental)");
    simulate->add_option("--e0", sim.e0, "Initial exposed (seir)");
    simulate->add_option("--horizon", sim.horizon, "Time horizon (compartmental)");
    simulate->add_option("--dt", sim.dt, "Integration step (compartmental)");
    simulate->add_option("--graph", sim.graph, "Contact graph JSON (network models)");
    simulate->add_option("--nodes", sim.nodes, "Random graph size (network models)");
    simulate->add_option("--edge-prob", sim.edge_prob, "Random graph edge probability");
    simulate->add_option("--steps", sim.steps, "Steps (network models)");
    simulate->add_option("--step-dt", sim.step_dt, "Time per step (network models)");
    simulate->add_option("--initial-infected", initial, "Comma-separated node ids");
    simulate->add_option("--base-flow", sim.base_flow, "Mobility base flow (scenario)");
    simulate->add_option("--distance-decay", sim.distance_decay, "Mobility distance decay (scenario)");
    simulate->add_option("--period", sim.period, "Mobility period in steps (scenario)");
    simulate->add_option("--out", out_path, "Dataset file (default: stdout)");
    simulate->add_option("--emit-curve", curve_path, "Also write aggregate counts as CSV");
    add_seed(simulate);

    // forecast
    ForecastConfig fc;
    auto* forecast = app.add_subcommand("forecast", "Train and evaluate a forecaster");
    forecast->add_option("--data", fc.data, "'toy' or a dataset file");
    forecast->add_option("--model", fc.model, "Forecaster name");
    forecast->add_option("--lookback", fc.window.lookback, "Input window length");
    forecast->add_option("--horizon", fc.window.horizon, "Prediction length");
    forecast->add_option("--ar-order", fc.options.ar_order, "AR order p");
    forecast->add_option("--differencing", fc.options.differencing, "AR differencing d");
    forecast->add_option("--period", fc.options.period, "Season length (trend-seasonal)");
    forecast->add_option("--population", fc.options.mechanistic.population, "Population (mechanistic)");
    std::string transforms;
    forecast->add_option("--transforms", transforms,
                         "Comma-separated, applied in order: zscore, minmax, frequency, time_embedding:D, "
                         "normalize_adjacency");
    forecast->add_option("--out", out_path, "Report file (default: stdout)");
    add_seed(forecast);

    // detect
    DetectConfig dc;
    auto* detect = app.add_subcommand("detect", "Evaluate source detectors");
    detect->add_option("--cases", dc.cases, "'synthetic-trees' or a cases/snapshot file");
    detect->add_option("--detector", dc.detector, "jordan | rumor | montecarlo | all");
    detect->add_option("--count", dc.count, "Synthetic cases");
    detect->add_option("--nodes", dc.nodes, "Nodes per synthetic tree");
    detect->add_option("--infected", dc.infected, "Infected nodes per synthetic case");
    detect->add_option("--replicates", dc.replicates, "Monte Carlo replicates per candidate");
    detect->add_option("--beta", dc.beta, "Monte Carlo transmission rate");
    detect->add_option("--gamma", dc.gamma, "Monte Carlo recovery rate");
    detect->add_option("--out", out_path, "Report file (default: stdout)");
    add_seed(detect);

    // serve
    std::string address = "127.0.0.1";
    std::uint16_t port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "Run the interactive session server");
    serve_cmd->add_option("--address", address, "Listen address");
    serve_cmd->add_option("--port", port, "Listen port (0 = any)");

    try {
        std::vector<std::string> args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    const SeedPolicy seed{master_seed, stream_id};
    try {
        if (*simulate) {
            sim.initial_infected = parse_node_list(initial);
            sim.seed = seed;
            const SimulationOutput result = run_simulate(sim);
            const std::string dataset = serialize_dataset(result.dataset, result.metadata);
            if (out_path.empty()) out << dataset;
            else write_text(out_path, dataset);
            if (!curve_path.empty()) write_text(curve_path, result.curve_csv);
            err << "simulate " << sim.model << ": " << result.dataset.panel().n_steps() << " steps, "
                << result.dataset.panel().n_nodes() << " nodes" << (out_path.empty() ? "" : " -> " + out_path) << "\n";
        } else if (*forecast) {
            fc.seed = seed;
            fc.transforms = split_list(transforms);
            const Json report = run_forecast(fc);
            emit_report(report, out_path, out);
            const Json& m = report["metrics"];
            err << "forecast " << fc.model << ": MAE " << m["mae"].dump() << ", RMSE " << m["rmse"].dump() << " over "
                << report["metrics"]["n_windows"].dump() << " test windows\n";
        } else if (*detect) {
            dc.seed = seed;
            const Json report = run_detect(dc);
            emit_report(report, out_path, out);
            auto line = [&](const std::string& name, const Json& m) {
                err << "detect " << name << ": top1 " << m["top1"].dump() << ", top3 " << m["top3"].dump()
                    << ", mean rank " << m["mean_rank"].dump() << " over " << m["n_cases"].dump() << " cases\n";
            };
            if (dc.detector == "all") {
                for (const auto& name : detector_names()) line(name, report["metrics"][name]);
            } else {
                line(dc.detector, report["metrics"]);
            }
        } else if (*serve_cmd) {
            return serve(address, port, err);
        }
    } catch (const Error& e) {
        err << "error: " << e.what();
        if (!e.field().empty()) err << " (field: " << e.field() << ")";
        err << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace epikit
