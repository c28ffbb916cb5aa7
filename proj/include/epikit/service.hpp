#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "epikit/io.hpp"
#include "epikit/network_sir.hpp"

namespace epikit::service {

inline constexpr const char* kSessionLogVersion = "epikit.session-log/1";

enum class Action { Vaccinate, Quarantine };
std::string_view to_string(Action a) noexcept;
Action action_from_string(std::string_view s);

enum class SessionStatus { Running, Finished };
std::string_view to_string(SessionStatus s) noexcept;

struct NodeChange {
    NodeId node;
    Compartment state;
};

/// Delta frame; seq equals the step it produced (seq 0 lists the non-S
/// nodes of the initial state).
struct Frame {
    std::uint64_t seq = 0;
    std::uint64_t step = 0;
    std::vector<NodeChange> changed;
};

struct StateView {
    std::uint64_t step = 0;
    SessionStatus status = SessionStatus::Running;
    std::vector<Compartment> states;
};

struct NodeHistory {
    NodeId node = 0;
    std::vector<Compartment> timeline;          // one entry per step 0..current
    std::optional<std::uint64_t> infection_step;
    std::optional<NodeId> infection_source;     // neighbor that transmitted
};

struct InterventionAck {
    Action action;
    NodeId node;
    std::uint64_t effective_step;  // first step whose state reflects it
};

struct StepResult {
    std::uint64_t step = 0;
    SessionStatus status = SessionStatus::Running;
    std::vector<Frame> frames;
};

using FrameSink = std::function<void(const Frame&)>;

/// In-memory registry of interactive NetworkSIR sessions. Commands on one
/// session are serialized by that session's mutex; different sessions never
/// share state. Every command is appended to the session's event log, and
/// replaying a log rebuilds the same history.
class SessionManager {
public:
    SessionManager();
    ~SessionManager();
    SessionManager(const SessionManager&) = delete;
    SessionManager& operator=(const SessionManager&) = delete;

    std::string create(StaticGraph graph, const NetworkSirConfig& cfg, const SeedPolicy& seed);
    StepResult step(const std::string& id, std::uint64_t k);
    InterventionAck intervene(const std::string& id, Action action, NodeId node);
    StateView state(const std::string& id) const;
    NodeHistory node_history(const std::string& id, NodeId node) const;
    std::vector<Compartment> history_row(const std::string& id, std::uint64_t step) const;
    std::uint64_t current_step(const std::string& id) const;

    /// {version, create: {graph, config, seed}, commands: [...]}
    Json export_log(const std::string& id) const;
    /// Builds a new session by re-running a log; returns its id.
    std::string replay(const Json& log);

    /// Delivers every frame with seq ≥ from_seq, then future frames in order.
    /// The sink runs under the session lock and must not call back into the
    /// manager. Returns a token for unsubscribe.
    std::uint64_t subscribe(const std::string& id, std::uint64_t from_seq, FrameSink sink);
    void unsubscribe(const std::string& id, std::uint64_t token);

    std::vector<std::string> ids() const;

private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& id) const;

    mutable std::shared_mutex registry_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

Json frame_to_json(const Frame& f);
Json state_to_json(const std::string& id, const StateView& s);
Json node_history_to_json(const NodeHistory& h);

NetworkSirConfig config_from_json(const Json& j);
Json config_to_json(const NetworkSirConfig& cfg);
SeedPolicy seed_from_json(const Json& j);
Json seed_to_json(const SeedPolicy& s);

struct ApiResponse {
    int status = 200;
    Json body;
};

/// HTTP-independent router for the JSON API:
///   POST /sessions                       {graph | random_graph, config, seed}
///   POST /sessions/replay                session log
///   POST /sessions/{id}/step             {k}
///   POST /sessions/{id}/intervene        {action, node}
///   GET  /sessions/{id}/state
///   GET  /sessions/{id}/nodes/{n}/history
///   GET  /sessions/{id}/log
/// Errors are {code, message, field?}.
ApiResponse handle_request(SessionManager& manager, std::string_view method, std::string_view target,
                           std::string_view body);

/// Boost.Beast server exposing handle_request over HTTP and
/// /sessions/{id}/stream over WebSocket.
class HttpServer {
public:
    HttpServer(std::shared_ptr<SessionManager> manager, std::string address, std::uint16_t port);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and starts accepting in a background thread; returns the bound
    /// port (useful with port 0).
    std::uint16_t start();
    void stop();
    /// Blocks until stop() is called from another thread.
    void wait();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace epikit::service
