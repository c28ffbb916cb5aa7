#include "epikit/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "epikit/error.hpp"
#include "epikit/simulate.hpp"

namespace epikit {

namespace {

const Json& field(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object()) fail(ErrorKind::Parse, "expected an object", where);
    auto it = j.find(key);
    if (it == j.end()) fail(ErrorKind::Parse, std::string("missing field '") + key + "'", where + "." + key);
    return *it;
}

template <class T>
T as(const Json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("wrong type: ") + e.what(), where);
    }
}

double as_real(const Json& j, const std::string& where) {
    if (!j.is_number()) fail(ErrorKind::Parse, "expected a number", where);
    return j.get<double>();
}

std::size_t as_count(const Json& j, const std::string& where) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) fail(ErrorKind::Parse, "expected a non-negative integer", where);
    return j.get<std::size_t>();
}

const Json& as_array(const Json& j, const std::string& where) {
    if (!j.is_array()) fail(ErrorKind::Parse, "expected an array", where);
    return j;
}

Json panel_to_json(const FeaturePanel& p) {
    Json steps = Json::array();
    for (std::size_t t = 0; t < p.n_steps(); ++t) {
        Json nodes = Json::array();
        for (std::size_t v = 0; v < p.n_nodes(); ++v) {
            Json feats = Json::array();
            for (std::size_t f = 0; f < p.n_features(); ++f) feats.push_back(p.at(t, v, f));
            nodes.push_back(std::move(feats));
        }
        steps.push_back(std::move(nodes));
    }
    return steps;
}

FeaturePanel panel_from_json(const Json& j) {
    const Json& steps = as_array(j, "panel");
    const std::size_t T = steps.size();
    if (T == 0) fail(ErrorKind::Shape, "panel has no steps", "panel");
    const std::size_t N = as_array(steps[0], "panel[0]").size();
    if (N == 0) fail(ErrorKind::Shape, "panel has no nodes", "panel[0]");
    const std::size_t F = as_array(steps[0][0], "panel[0][0]").size();
    if (F == 0) fail(ErrorKind::Shape, "panel has no features", "panel[0][0]");
    std::vector<double> values;
    values.reserve(T * N * F);
    for (std::size_t t = 0; t < T; ++t) {
        const std::string wt = "panel[" + std::to_string(t) + "]";
        const Json& nodes = as_array(steps[t], wt);
        if (nodes.size() != N) fail(ErrorKind::Shape, "ragged panel: expected " + std::to_string(N) + " nodes", wt);
        for (std::size_t v = 0; v < N; ++v) {
            const std::string wv = wt + "[" + std::to_string(v) + "]";
            const Json& feats = as_array(nodes[v], wv);
            if (feats.size() != F) fail(ErrorKind::Shape, "ragged panel: expected " + std::to_string(F) + " features", wv);
            for (std::size_t f = 0; f < F; ++f) values.push_back(as_real(feats[f], wv + "[" + std::to_string(f) + "]"));
        }
    }
    return FeaturePanel(T, N, F, std::move(values));
}

Json states_to_json(const NodeStates& s) {
    Json rows = Json::array();
    for (std::size_t t = 0; t < s.n_steps(); ++t) {
        std::string row;
        for (Compartment c : s.row(t)) row.push_back(to_char(c));
        rows.push_back(std::move(row));
    }
    return rows;
}

NodeStates states_from_json(const Json& j) {
    const Json& rows = as_array(j, "states");
    if (rows.empty()) fail(ErrorKind::Shape, "states has no steps", "states");
    std::vector<Compartment> data;
    std::size_t n = 0;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        const std::string where = "states[" + std::to_string(t) + "]";
        const auto row = as<std::string>(rows[t], where);
        if (t == 0) n = row.size();
        if (row.size() != n) fail(ErrorKind::Shape, "ragged states", where);
        for (char c : row) {
            try {
                data.push_back(compartment_from_string(std::string_view(&c, 1)));
            } catch (const Error& e) {
                fail(ErrorKind::Parse, e.what(), where);
            }
        }
    }
    return NodeStates(rows.size(), n, std::move(data));
}

/// Re-tags an error raised inside a sub-document with its field path.
template <class F>
auto within(const std::string& where, F&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.field().rfind(where, 0) == 0) throw;
        fail(e.kind(), e.what(), e.field().empty() ? where : where + "." + e.field());
    }
}

}  // namespace

Json graph_to_json(const StaticGraph& g) {
    Json edges = Json::array();
    for (const Edge& e : g.edges()) edges.push_back(Json::array({e.u, e.v, e.w}));
    return Json{{"n_nodes", g.n_nodes()}, {"directed", g.directed()}, {"edges", std::move(edges)}};
}

StaticGraph graph_from_json(const Json& j, const std::string& where) {
    const std::size_t n = as_count(field(j, "n_nodes", where), where + ".n_nodes");
    const bool directed = j.contains("directed") ? as<bool>(j["directed"], where + ".directed") : false;
    const Json& list = as_array(field(j, "edges", where), where + ".edges");
    std::vector<Edge> edges;
    edges.reserve(list.size());
    bool self_loop = false;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string we = where + ".edges[" + std::to_string(i) + "]";
        const Json& e = as_array(list[i], we);
        if (e.size() != 2 && e.size() != 3) fail(ErrorKind::Parse, "edge must be [u, v] or [u, v, w]", we);
        const std::size_t u = as_count(e[0], we + "[0]");
        const std::size_t v = as_count(e[1], we + "[1]");
        if (u >= n || v >= n)
            fail(ErrorKind::Shape, "edge endpoint out of range for n_nodes=" + std::to_string(n), where + ".n_nodes");
        const double w = e.size() == 3 ? as_real(e[2], we + "[2]") : 1.0;
        self_loop = self_loop || u == v;
        edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v), w});
    }
    return within(where, [&] {
        return self_loop ? StaticGraph::with_self_loops(n, std::move(edges), directed)
                         : StaticGraph(n, std::move(edges), directed);
    });
}

Json dataset_to_json(const EpiDataset& ds, const Json& metadata) {
    Json j;
    j["version"] = kDatasetVersion;
    j["panel"] = panel_to_json(ds.panel());
    j["states"] = ds.states() ? states_to_json(*ds.states()) : Json(nullptr);
    j["static_graph"] = ds.static_graph() ? graph_to_json(*ds.static_graph()) : Json(nullptr);
    if (ds.dynamic_graph()) {
        Json snaps = Json::array();
        for (const StaticGraph& g : ds.dynamic_graph()->snapshots()) snaps.push_back(graph_to_json(g));
        j["dynamic_graph"] = std::move(snaps);
    } else {
        j["dynamic_graph"] = nullptr;
    }
    j["split"] = Json{{"train", ds.split().train}, {"val", ds.split().val}};
    j["metadata"] = metadata.is_object() ? metadata : Json::object();
    return j;
}

EpiDataset dataset_from_json(const Json& j) {
    if (!j.is_object()) fail(ErrorKind::Parse, "dataset file must hold a JSON object", "");
    const auto version = as<std::string>(field(j, "version", "dataset"), "version");
    if (version != kDatasetVersion)
        fail(ErrorKind::Parse, "unknown dataset version '" + version + "' (expected " + kDatasetVersion + ")", "version");

    FeaturePanel panel = panel_from_json(field(j, "panel", "dataset"));

    std::optional<NodeStates> states;
    if (j.contains("states") && !j["states"].is_null()) states = states_from_json(j["states"]);

    std::optional<StaticGraph> static_graph;
    if (j.contains("static_graph") && !j["static_graph"].is_null())
        static_graph = graph_from_json(j["static_graph"], "static_graph");

    std::optional<DynamicGraph> dynamic_graph;
    if (j.contains("dynamic_graph") && !j["dynamic_graph"].is_null()) {
        const Json& list = as_array(j["dynamic_graph"], "dynamic_graph");
        std::vector<StaticGraph> snaps;
        for (std::size_t t = 0; t < list.size(); ++t)
            snaps.push_back(graph_from_json(list[t], "dynamic_graph[" + std::to_string(t) + "]"));
        dynamic_graph = DynamicGraph(std::move(snaps));
    }

    SplitFractions split;
    if (j.contains("split") && !j["split"].is_null()) {
        split.train = as_real(field(j["split"], "train", "split"), "split.train");
        split.val = as_real(field(j["split"], "val", "split"), "split.val");
    }
    return EpiDataset(std::move(panel), std::move(states), std::move(static_graph), std::move(dynamic_graph), split);
}

std::string serialize_dataset(const EpiDataset& ds, const Json& metadata) {
    return dataset_to_json(ds, metadata).dump() + "\n";
}

void save_dataset(const EpiDataset& ds, const std::filesystem::path& path, const Json& metadata) {
    const std::string bytes = serialize_dataset(ds, metadata);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Runtime, "cannot open " + tmp.string() + " for writing", "path");
        out << bytes;
        if (!out.flush()) fail(ErrorKind::Runtime, "write failed for " + tmp.string(), "path");
    }
    std::filesystem::rename(tmp, path);
}

namespace {

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::NotFound, "cannot open " + path.string(), "path");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return Json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Parse, "malformed JSON in " + path.string() + ": " + e.what(), "");
    }
}

}  // namespace

EpiDataset load_dataset(const std::filesystem::path& path) { return dataset_from_json(read_json_file(path)); }

Json load_dataset_metadata(const std::filesystem::path& path) {
    const Json j = read_json_file(path);
    return j.contains("metadata") && j["metadata"].is_object() ? j["metadata"] : Json::object();
}

// ------------------------------------------------------------ snapshots

Json snapshot_to_json(const Snapshot& s) {
    Json j{{"graph", graph_to_json(s.graph)}, {"infected", s.infected}};
    j["observation_time"] = s.observation_time ? Json(*s.observation_time) : Json(nullptr);
    return j;
}

Snapshot snapshot_from_json(const Json& j, const std::string& where) {
    Snapshot s;
    s.graph = graph_from_json(field(j, "graph", where), where + ".graph");
    const Json& inf = as_array(field(j, "infected", where), where + ".infected");
    for (std::size_t i = 0; i < inf.size(); ++i) {
        const std::size_t v = as_count(inf[i], where + ".infected[" + std::to_string(i) + "]");
        if (v >= s.graph.n_nodes())
            fail(ErrorKind::Shape, "infected node out of range", where + ".infected[" + std::to_string(i) + "]");
        s.infected.push_back(static_cast<NodeId>(v));
    }
    if (s.infected.empty()) fail(ErrorKind::InvalidArgument, "infected set must be nonempty", where + ".infected");
    if (j.contains("observation_time") && !j["observation_time"].is_null())
        s.observation_time = as_count(j["observation_time"], where + ".observation_time");
    return s;
}

Json cases_to_json(const std::vector<DetectionCase>& cases) {
    Json list = Json::array();
    for (const auto& c : cases) {
        Json j = snapshot_to_json(c.snapshot);
        j["true_source"] = c.true_source;
        list.push_back(std::move(j));
    }
    return Json{{"version", kCasesVersion}, {"cases", std::move(list)}};
}

std::vector<DetectionCase> cases_from_json(const Json& j) {
    std::vector<DetectionCase> out;
    auto one = [&](const Json& c, const std::string& where) {
        DetectionCase dc{snapshot_from_json(c, where), 0};
        if (c.contains("true_source") && !c["true_source"].is_null())
            dc.true_source = static_cast<NodeId>(as_count(c["true_source"], where + ".true_source"));
        out.push_back(std::move(dc));
    };
    if (j.is_object() && j.contains("cases")) {
        const auto version = as<std::string>(field(j, "version", "cases"), "version");
        if (version != kCasesVersion) fail(ErrorKind::Parse, "unknown cases version '" + version + "'", "version");
        const Json& list = as_array(j["cases"], "cases");
        for (std::size_t i = 0; i < list.size(); ++i) one(list[i], "cases[" + std::to_string(i) + "]");
    } else {
        one(j, "snapshot");
    }
    if (out.empty()) fail(ErrorKind::InvalidArgument, "no cases", "cases");
    return out;
}

std::vector<DetectionCase> load_cases(const std::filesystem::path& path) { return cases_from_json(read_json_file(path)); }

// --------------------------------------------------------------- reports

Json metrics_to_json(const MetricSet& m) {
    return Json{{"mae", m.mae},
                {"rmse", m.rmse},
                {"mape", m.mape ? Json(*m.mape) : Json(nullptr)},
                {"mape_excluded", m.mape_excluded},
                {"n_points", m.n_points}};
}

Json forecast_report_to_json(const ForecastReport& r) {
    Json j = metrics_to_json(r.overall);
    Json per = Json::array();
    for (const auto& m : r.per_horizon) per.push_back(metrics_to_json(m));
    j["per_horizon"] = std::move(per);
    j["n_windows"] = r.n_windows;
    return j;
}

Json detection_report_to_json(const DetectionReport& r) {
    return Json{{"top1", r.top1}, {"top3", r.top3}, {"mean_rank", r.mean_rank}, {"n_cases", r.n_cases}};
}

Json make_report(const std::string& task, const std::string& model, Json metrics, Json config, const SeedPolicy& seed) {
    return Json{{"task", task},
                {"model", model},
                {"metrics", std::move(metrics)},
                {"config", std::move(config)},
                {"seed", Json{{"master_seed", seed.master_seed}, {"stream_id", seed.stream_id}}}};
}

// ------------------------------------------------------------ toy dataset

EpiDataset generate_toy_dataset(const SeedPolicy& seed) {
    constexpr std::size_t kNodes = 47;
    constexpr std::size_t kSteps = 120;
    const StaticGraph contacts = random_graph(kNodes, 0.1, derive_stream(seed, 0));

    MobilityConfig mob;
    mob.n_regions = kNodes;
    mob.base_flow = 1.0;
    mob.distance_decay = 2.0;
    mob.daily_period = 7;
    mob.positions = random_positions(kNodes, derive_stream(seed, 1));

    NodeId hub = 0;
    for (NodeId v = 1; v < kNodes; ++v)
        if (contacts.degree(v) > contacts.degree(hub)) hub = v;
    NetworkSirConfig epi;
    epi.beta = 0.6;
    epi.gamma = 0.1;
    epi.dt = 1.0;
    epi.initial_infected = {hub};

    const Scenario sc = simulate_scenario(mob, epi, kSteps - 1, derive_stream(seed, 2), contacts);

    RandomStream noise(derive_stream(seed, 3));
    PanelBuilder panel(kSteps, kNodes, 3);
    for (std::size_t t = 0; t < kSteps; ++t) {
        for (std::size_t v = 0; v < kNodes; ++v) {
            panel(t, v, 0) = sc.panel.at(t, v, 0);
            panel(t, v, 1) = sc.panel.at(t, v, 1);
            panel(t, v, 2) = std::max(0.0, 10.0 * sc.panel.at(t, v, 0) + 2.0 * noise.normal());
        }
    }
    return EpiDataset(std::move(panel).build(), sc.states, contacts, sc.graph, SplitFractions{0.7, 0.1});
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace epikit
