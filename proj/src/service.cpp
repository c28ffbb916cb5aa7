#include "epikit/service.hpp"

#include <algorithm>
#include <charconv>
#include <random>

#include "epikit/error.hpp"
#include "epikit/simulate.hpp"

namespace epikit::service {

std::string_view to_string(Action a) noexcept { return a == Action::Vaccinate ? "vaccinate" : "quarantine"; }

Action action_from_string(std::string_view s) {
    if (s == "vaccinate") return Action::Vaccinate;
    if (s == "quarantine") return Action::Quarantine;
    fail(ErrorKind::InvalidArgument, "unknown action '" + std::string(s) + "' (expected vaccinate|quarantine)", "action");
}

std::string_view to_string(SessionStatus s) noexcept { return s == SessionStatus::Running ? "running" : "finished"; }

namespace {

constexpr std::uint64_t kMaxStepsPerCommand = 100000;

std::string new_session_id() {
    static std::mutex m;
    static std::random_device device;
    std::lock_guard lock(m);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 4; ++i) {
        std::uint32_t word = device();
        for (int j = 0; j < 8; ++j, word >>= 4) id.push_back(kHex[word & 0xF]);
    }
    return id;
}

}  // namespace

struct SessionManager::Session {
    std::string id;
    std::unique_ptr<const StaticGraph> graph;
    NetworkSirConfig cfg;
    SeedPolicy seed;
    std::unique_ptr<NetworkSirEngine> engine;
    std::vector<std::vector<Compartment>> history;
    std::vector<Frame> frames;
    Json commands = Json::array();
    std::map<std::uint64_t, FrameSink> subscribers;
    std::uint64_t next_token = 1;
    std::mutex mutex;  // serializes commands

    mutable std::mutex view_mutex;  // guards only `view`
    std::shared_ptr<const StateView> view;

    SessionStatus status() const { return engine->finished() ? SessionStatus::Finished : SessionStatus::Running; }

    void publish(const Frame& f) {
        frames.push_back(f);
        for (auto& [token, sink] : subscribers) sink(f);
    }

    void commit() {
        auto v = std::make_shared<StateView>();
        v->step = engine->current_step();
        v->status = status();
        v->states = engine->states();
        std::lock_guard lock(view_mutex);
        view = std::move(v);
    }
};

SessionManager::SessionManager() = default;
SessionManager::~SessionManager() = default;

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
    std::shared_lock lock(registry_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(ErrorKind::NotFound, "unknown session '" + id + "'", "id");
    return it->second;
}

std::vector<std::string> SessionManager::ids() const {
    std::shared_lock lock(registry_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

std::string SessionManager::create(StaticGraph graph, const NetworkSirConfig& cfg, const SeedPolicy& seed) {
    auto s = std::make_shared<Session>();
    s->graph = std::make_unique<const StaticGraph>(std::move(graph));
    s->cfg = cfg;
    s->seed = seed;
    s->engine = std::make_unique<NetworkSirEngine>(*s->graph, cfg, seed);
    s->history.push_back(s->engine->states());
    Frame initial;
    for (NodeId v = 0; v < s->graph->n_nodes(); ++v)
        if (s->engine->states()[v] != Compartment::S) initial.changed.push_back({v, s->engine->states()[v]});
    s->frames.push_back(std::move(initial));
    s->commit();

    std::unique_lock lock(registry_mutex_);
    std::string id;
    do {
        id = new_session_id();
    } while (sessions_.count(id) != 0);
    s->id = id;
    sessions_.emplace(id, std::move(s));
    return id;
}

StepResult SessionManager::step(const std::string& id, std::uint64_t k) {
    require(k >= 1, "k must be >= 1", "k");
    require(k <= kMaxStepsPerCommand, "k must be <= " + std::to_string(kMaxStepsPerCommand), "k");
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    s->commands.push_back(Json{{"op", "step"}, {"k", k}});
    StepResult result;
    for (std::uint64_t i = 0; i < k && !s->engine->finished(); ++i) {
        const auto changed = s->engine->step();
        s->history.push_back(s->engine->states());
        Frame f;
        f.seq = f.step = s->engine->current_step();
        for (NodeId v : changed) f.changed.push_back({v, s->engine->states()[v]});
        s->publish(f);
        result.frames.push_back(std::move(f));
    }
    s->commit();
    result.step = s->engine->current_step();
    result.status = s->status();
    return result;
}

InterventionAck SessionManager::intervene(const std::string& id, Action action, NodeId node) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (node >= s->graph->n_nodes())
        fail(ErrorKind::NotFound, "unknown node " + std::to_string(node), "node");
    if (s->engine->finished()) fail(ErrorKind::Conflict, "session finished", "id");
    if (action == Action::Vaccinate) s->engine->vaccinate(node);
    else s->engine->quarantine(node);
    s->commands.push_back(Json{{"op", "intervene"}, {"action", to_string(action)}, {"node", node}});
    return {action, node, s->engine->current_step() + 1};
}

StateView SessionManager::state(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->view_mutex);
    return *s->view;
}

std::uint64_t SessionManager::current_step(const std::string& id) const { return state(id).step; }

NodeHistory SessionManager::node_history(const std::string& id, NodeId node) const {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (node >= s->graph->n_nodes()) fail(ErrorKind::NotFound, "unknown node " + std::to_string(node), "node");
    NodeHistory h;
    h.node = node;
    h.timeline.reserve(s->history.size());
    for (const auto& row : s->history) h.timeline.push_back(row[node]);
    h.infection_step = s->engine->infection_step(node);
    h.infection_source = s->engine->infection_source(node);
    return h;
}

std::vector<Compartment> SessionManager::history_row(const std::string& id, std::uint64_t step) const {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (step >= s->history.size()) fail(ErrorKind::NotFound, "step " + std::to_string(step) + " not reached", "step");
    return s->history[step];
}

Json SessionManager::export_log(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    return Json{{"version", kSessionLogVersion},
                {"create", Json{{"graph", graph_to_json(*s->graph)},
                                {"config", config_to_json(s->cfg)},
                                {"seed", seed_to_json(s->seed)}}},
                {"commands", s->commands}};
}

std::string SessionManager::replay(const Json& log) {
    if (!log.is_object() || log.value("version", "") != std::string(kSessionLogVersion))
        fail(ErrorKind::Parse, "not a session log (expected version " + std::string(kSessionLogVersion) + ")", "version");
    if (!log.contains("create")) fail(ErrorKind::Parse, "missing create block", "create");
    const Json& c = log["create"];
    if (!c.contains("graph") || !c.contains("config") || !c.contains("seed"))
        fail(ErrorKind::Parse, "create block needs graph, config and seed", "create");
    const std::string id =
        create(graph_from_json(c["graph"], "create.graph"), config_from_json(c["config"]), seed_from_json(c["seed"]));
    const Json commands = log.value("commands", Json::array());
    for (std::size_t i = 0; i < commands.size(); ++i) {
        const Json& cmd = commands[i];
        const std::string op = cmd.value("op", "");
        if (op == "step") {
            step(id, cmd.at("k").get<std::uint64_t>());
        } else if (op == "intervene") {
            intervene(id, action_from_string(cmd.at("action").get<std::string>()), cmd.at("node").get<NodeId>());
        } else {
            fail(ErrorKind::Parse, "unknown command '" + op + "'", "commands[" + std::to_string(i) + "].op");
        }
    }
    return id;
}

std::uint64_t SessionManager::subscribe(const std::string& id, std::uint64_t from_seq, FrameSink sink) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    for (const Frame& f : s->frames)
        if (f.seq >= from_seq) sink(f);
    const std::uint64_t token = s->next_token++;
    s->subscribers.emplace(token, std::move(sink));
    return token;
}

void SessionManager::unsubscribe(const std::string& id, std::uint64_t token) {
    std::shared_ptr<Session> s;
    try {
        s = find(id);
    } catch (const Error&) {
        return;
    }
    std::lock_guard lock(s->mutex);
    s->subscribers.erase(token);
}

// ------------------------------------------------------------------- JSON

Json frame_to_json(const Frame& f) {
    Json changed = Json::array();
    for (const auto& c : f.changed) changed.push_back(Json{{"node", c.node}, {"state", to_string(c.state)}});
    return Json{{"seq", f.seq}, {"step", f.step}, {"changed_nodes", std::move(changed)}};
}

Json state_to_json(const std::string& id, const StateView& s) {
    Json states = Json::array();
    for (Compartment c : s.states) states.push_back(to_string(c));
    return Json{{"id", id}, {"step", s.step}, {"status", to_string(s.status)}, {"states", std::move(states)}};
}

Json node_history_to_json(const NodeHistory& h) {
    Json timeline = Json::array();
    for (Compartment c : h.timeline) timeline.push_back(to_string(c));
    Json infection = nullptr;
    if (h.infection_step) {
        infection = Json{{"step", *h.infection_step},
                         {"source", h.infection_source ? Json(*h.infection_source) : Json(nullptr)}};
    }
    return Json{{"node", h.node}, {"timeline", std::move(timeline)}, {"infection", std::move(infection)}};
}

namespace {

std::vector<NodeId> node_list(const Json& j, const std::string& where) {
    std::vector<NodeId> out;
    if (j.is_null()) return out;
    if (!j.is_array()) fail(ErrorKind::InvalidArgument, "expected an array of node ids", where);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number_integer() || j[i].get<std::int64_t>() < 0)
            fail(ErrorKind::InvalidArgument, "node ids must be non-negative integers", where + "[" + std::to_string(i) + "]");
        out.push_back(j[i].get<NodeId>());
    }
    return out;
}

double number(const Json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) fail(ErrorKind::InvalidArgument, std::string(key) + " must be a number", key);
    return j[key].get<double>();
}

}  // namespace

NetworkSirConfig config_from_json(const Json& j) {
    if (!j.is_object()) fail(ErrorKind::InvalidArgument, "config must be an object", "config");
    NetworkSirConfig cfg;
    cfg.beta = number(j, "beta", cfg.beta);
    cfg.gamma = number(j, "gamma", cfg.gamma);
    cfg.dt = number(j, "dt", cfg.dt);
    cfg.initial_infected = node_list(j.value("initial_infected", Json(nullptr)), "initial_infected");
    cfg.immune = node_list(j.value("immune", Json(nullptr)), "immune");
    return cfg;
}

Json config_to_json(const NetworkSirConfig& cfg) {
    return Json{{"beta", cfg.beta},
                {"gamma", cfg.gamma},
                {"dt", cfg.dt},
                {"initial_infected", cfg.initial_infected},
                {"immune", cfg.immune}};
}

SeedPolicy seed_from_json(const Json& j) {
    if (j.is_null()) return {};
    if (j.is_number_unsigned() || j.is_number_integer()) return {j.get<std::uint64_t>(), 0};
    if (!j.is_object()) fail(ErrorKind::InvalidArgument, "seed must be an integer or {master_seed, stream_id}", "seed");
    return {j.value("master_seed", std::uint64_t{0}), j.value("stream_id", std::uint64_t{0})};
}

Json seed_to_json(const SeedPolicy& s) { return Json{{"master_seed", s.master_seed}, {"stream_id", s.stream_id}}; }

// ----------------------------------------------------------------- routing

namespace {

int http_status(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NotFound: return 404;
        case ErrorKind::Conflict: return 409;
        case ErrorKind::Runtime: return 500;
        default: return 400;
    }
}

std::string_view error_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid_argument";
        case ErrorKind::Shape: return "shape_mismatch";
        case ErrorKind::Parse: return "parse_error";
        case ErrorKind::Runtime: return "runtime_error";
        case ErrorKind::NotFound: return "not_found";
        case ErrorKind::Conflict: return "conflict";
    }
    return "error";
}

ApiResponse error_response(int status, std::string_view code, const std::string& message, const std::string& field) {
    Json body{{"code", code}, {"message", message}};
    if (!field.empty()) body["field"] = field;
    return {status, std::move(body)};
}

std::vector<std::string_view> split_path(std::string_view target) {
    const auto q = target.find('?');
    if (q != std::string_view::npos) target = target.substr(0, q);
    std::vector<std::string_view> parts;
    std::size_t i = 0;
    while (i < target.size()) {
        while (i < target.size() && target[i] == '/') ++i;
        const std::size_t j = target.find('/', i);
        const std::size_t end = j == std::string_view::npos ? target.size() : j;
        if (end > i) parts.push_back(target.substr(i, end - i));
        i = end;
    }
    return parts;
}

NodeId parse_node(std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v > std::numeric_limits<NodeId>::max())
        fail(ErrorKind::NotFound, "unknown node '" + std::string(s) + "'", "node");
    return static_cast<NodeId>(v);
}

Json parse_body(std::string_view body) {
    if (body.empty()) return Json::object();
    try {
        return Json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Parse, std::string("malformed JSON body: ") + e.what(), "body");
    }
}

StaticGraph graph_from_request(const Json& body) {
    if (body.contains("graph")) return graph_from_json(body["graph"], "graph");
    if (body.contains("random_graph")) {
        const Json& r = body["random_graph"];
        if (!r.is_object() || !r.contains("n")) fail(ErrorKind::InvalidArgument, "random_graph needs n", "random_graph.n");
        return random_graph(r["n"].get<std::size_t>(), r.value("edge_prob", 0.1),
                            seed_from_json(r.value("seed", Json(nullptr))));
    }
    fail(ErrorKind::InvalidArgument, "request needs graph or random_graph", "graph");
}

ApiResponse route(SessionManager& m, std::string_view method, std::string_view target, std::string_view raw) {
    const auto parts = split_path(target);
    if (parts.empty() || parts[0] != "sessions") return error_response(404, "not_found", "no such endpoint", "");

    if (parts.size() == 1) {
        if (method != "POST") return error_response(405, "method_not_allowed", "use POST /sessions", "");
        const Json body = parse_body(raw);
        const Json cfg_json = body.value("config", Json::object());
        StaticGraph g = graph_from_request(body);
        const std::size_t n = g.n_nodes();
        const std::string id = m.create(std::move(g), config_from_json(cfg_json), seed_from_json(body.value("seed", Json(nullptr))));
        const StateView v = m.state(id);
        return {201, Json{{"id", id}, {"step", v.step}, {"status", to_string(v.status)}, {"n_nodes", n}}};
    }
    if (parts.size() == 2 && parts[1] == "replay") {
        if (method != "POST") return error_response(405, "method_not_allowed", "use POST /sessions/replay", "");
        const std::string id = m.replay(parse_body(raw));
        const StateView v = m.state(id);
        return {201, Json{{"id", id}, {"step", v.step}, {"status", to_string(v.status)}}};
    }

    const std::string id(parts[1]);
    if (parts.size() == 3 && parts[2] == "step") {
        if (method != "POST") return error_response(405, "method_not_allowed", "use POST", "");
        const Json body = parse_body(raw);
        if (!body.contains("k") || !body["k"].is_number_integer() || body["k"].get<std::int64_t>() < 0)
            fail(ErrorKind::InvalidArgument, "k must be a positive integer", "k");
        const StepResult r = m.step(id, body["k"].get<std::uint64_t>());
        Json frames = Json::array();
        for (const auto& f : r.frames) frames.push_back(frame_to_json(f));
        return {200, Json{{"step", r.step}, {"status", to_string(r.status)}, {"frames", std::move(frames)}}};
    }
    if (parts.size() == 3 && parts[2] == "intervene") {
        if (method != "POST") return error_response(405, "method_not_allowed", "use POST", "");
        const Json body = parse_body(raw);
        if (!body.contains("action") || !body["action"].is_string())
            fail(ErrorKind::InvalidArgument, "action must be a string", "action");
        if (!body.contains("node") || !body["node"].is_number_integer() || body["node"].get<std::int64_t>() < 0)
            fail(ErrorKind::InvalidArgument, "node must be a non-negative integer", "node");
        const auto ack = m.intervene(id, action_from_string(body["action"].get<std::string>()),
                                     body["node"].get<NodeId>());
        return {200, Json{{"accepted", true},
                          {"action", to_string(ack.action)},
                          {"node", ack.node},
                          {"effective_step", ack.effective_step}}};
    }
    if (parts.size() == 3 && parts[2] == "state") {
        if (method != "GET") return error_response(405, "method_not_allowed", "use GET", "");
        return {200, state_to_json(id, m.state(id))};
    }
    if (parts.size() == 3 && parts[2] == "log") {
        if (method != "GET") return error_response(405, "method_not_allowed", "use GET", "");
        return {200, m.export_log(id)};
    }
    if (parts.size() == 5 && parts[2] == "nodes" && parts[4] == "history") {
        if (method != "GET") return error_response(405, "method_not_allowed", "use GET", "");
        return {200, node_history_to_json(m.node_history(id, parse_node(parts[3])))};
    }
    return error_response(404, "not_found", "no such endpoint", "");
}

}  // namespace

ApiResponse handle_request(SessionManager& manager, std::string_view method, std::string_view target,
                           std::string_view body) {
    try {
        return route(manager, method, target, body);
    } catch (const Error& e) {
        return error_response(http_status(e.kind()), error_code(e.kind()), e.what(), e.field());
    } catch (const nlohmann::json::exception& e) {
        return error_response(400, "invalid_argument", e.what(), "");
    } catch (const std::exception& e) {
        return error_response(500, "runtime_error", e.what(), "");
    }
}

}  // namespace epikit::service
