#include "epikit/network_sir.hpp"

#include <algorithm>
#include <cmath>

#include "epikit/error.hpp"

namespace epikit {

namespace {

enum DrawTag : std::uint64_t { kRecoveryDraw = 1, kEdgeDraw = 2, kAttributionDraw = 3, kEdgeTrialDraw = 4 };

double uniform_open_low(std::uint64_t key, std::initializer_list<std::uint64_t> words) {
    return rng::to_unit_open_low(rng::hash(key, words));
}

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) noexcept {
    return a > NetworkSirEngine::kNever - b ? NetworkSirEngine::kNever : a + b;
}

/// Picks among candidate sources proportionally to weight with one uniform.
template <class Candidates, class WeightOf>
std::size_t pick_weighted(const Candidates& candidates, WeightOf weight_of, double u) {
    double total = 0.0;
    for (const auto& c : candidates) total += weight_of(c);
    if (candidates.size() == 1 || !(total > 0.0)) return 0;
    double target = u * total;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        target -= weight_of(candidates[i]);
        if (target < 0.0) return i;
    }
    return candidates.size() - 1;
}

}  // namespace

void NetworkSirConfig::validate(std::size_t n_nodes) const {
    require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and >= 0", "beta");
    require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be finite and >= 0", "gamma");
    require(std::isfinite(dt) && dt > 0.0, "dt must be > 0", "dt");
    require(!initial_infected.empty(), "initial_infected must be nonempty", "initial_infected");
    std::vector<char> seen(n_nodes, 0);
    for (std::size_t i = 0; i < initial_infected.size(); ++i) {
        const NodeId v = initial_infected[i];
        require(v < n_nodes, "node id " + std::to_string(v) + " out of range",
                "initial_infected[" + std::to_string(i) + "]");
        seen[v] = 1;
    }
    for (std::size_t i = 0; i < immune.size(); ++i) {
        const NodeId v = immune[i];
        require(v < n_nodes, "node id " + std::to_string(v) + " out of range", "immune[" + std::to_string(i) + "]");
        require(!seen[v], "node " + std::to_string(v) + " is both infected and immune", "immune");
    }
}

std::uint64_t geometric_trials(double u, double rate_dt) noexcept {
    if (!(rate_dt > 0.0)) return NetworkSirEngine::kNever;
    const double k = std::floor(-std::log(u) / rate_dt);
    if (!(k < 1e18)) return NetworkSirEngine::kNever;
    return 1 + static_cast<std::uint64_t>(k);
}

// ------------------------------------------------------------------- engine

NetworkSirEngine::NetworkSirEngine(const StaticGraph& graph, const NetworkSirConfig& cfg, const SeedPolicy& seed)
    : graph_(&graph), cfg_(cfg), key_(rng::stream_key(seed)) {
    cfg_.validate(graph.n_nodes());
    const std::size_t n = graph.n_nodes();
    current_.assign(n, Compartment::S);
    infected_at_.assign(n, kNever);
    source_.assign(n, -1);
    for (NodeId v : cfg_.immune) current_[v] = Compartment::V;
    std::vector<NodeId> seeds = cfg_.initial_infected;
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    for (NodeId v : seeds) infect(v, std::nullopt);
}

std::uint64_t NetworkSirEngine::infectious_period(NodeId u) const noexcept {
    return geometric_trials(uniform_open_low(key_, {kRecoveryDraw, u}), cfg_.gamma * cfg_.dt);
}

std::uint64_t NetworkSirEngine::transmission_delay(NodeId u, NodeId v, double w) const noexcept {
    return geometric_trials(uniform_open_low(key_, {kEdgeDraw, u, v}), cfg_.beta * w * cfg_.dt);
}

void NetworkSirEngine::schedule(std::uint64_t at, Event e) {
    if (at == kNever) return;
    events_[at].push_back(e);
}

void NetworkSirEngine::infect(NodeId v, std::optional<NodeId> source) {
    current_[v] = Compartment::I;
    infected_at_[v] = step_;
    source_[v] = source ? static_cast<std::int64_t>(*source) : -1;
    const std::uint64_t period = infectious_period(v);
    schedule(saturating_add(step_, period), {Event::Recover, v, v, 0.0});
    for (const Neighbor& nb : graph_->neighbors(v)) {
        if (nb.node == v) continue;
        const std::uint64_t delay = transmission_delay(v, nb.node, nb.weight);
        if (delay <= period) schedule(saturating_add(step_, delay), {Event::Infect, nb.node, v, nb.weight});
    }
}

void NetworkSirEngine::vaccinate(NodeId node) {
    require(node < current_.size(), "node id " + std::to_string(node) + " out of range", "node");
    pending_.emplace_back(node, false);
}

void NetworkSirEngine::quarantine(NodeId node) {
    require(node < current_.size(), "node id " + std::to_string(node) + " out of range", "node");
    pending_.emplace_back(node, true);
}

std::vector<NodeId> NetworkSirEngine::step() {
    std::vector<NodeId> changed;
    for (auto [node, is_quarantine] : pending_) {
        Compartment& c = current_[node];
        if (c == Compartment::V || c == Compartment::Q) continue;
        if (is_quarantine) {
            c = Compartment::Q;
            changed.push_back(node);
        } else if (c == Compartment::S) {
            c = Compartment::V;
            changed.push_back(node);
        }
    }
    pending_.clear();

    const std::uint64_t next = step_ + 1;
    std::vector<Compartment> before = current_;
    std::vector<Event> due;
    if (auto it = events_.find(next); it != events_.end()) {
        due = std::move(it->second);
        events_.erase(it);
    }

    // Group valid infection attempts by target; validity is judged on the
    // state at the start of the step.
    std::map<NodeId, std::vector<Event>> attempts;
    for (const Event& e : due) {
        if (e.kind == Event::Recover) {
            if (before[e.target] == Compartment::I) {
                current_[e.target] = Compartment::R;
                changed.push_back(e.target);
            }
        } else if (before[e.target] == Compartment::S && before[e.source] == Compartment::I) {
            attempts[e.target].push_back(e);
        }
    }

    step_ = next;
    for (auto& [target, list] : attempts) {
        std::sort(list.begin(), list.end(), [](const Event& a, const Event& b) { return a.source < b.source; });
        const std::size_t pick = pick_weighted(list, [](const Event& e) { return e.weight; },
                                               rng::uniform(key_, {kAttributionDraw, target, next}));
        infect(target, list[pick].source);
        changed.push_back(target);
    }
    std::sort(changed.begin(), changed.end());
    changed.erase(std::unique(changed.begin(), changed.end()), changed.end());
    return changed;
}

std::size_t NetworkSirEngine::count(Compartment c) const noexcept {
    return static_cast<std::size_t>(std::count(current_.begin(), current_.end(), c));
}

std::optional<std::uint64_t> NetworkSirEngine::infection_step(NodeId v) const {
    if (infected_at_.at(v) == kNever) return std::nullopt;
    return infected_at_[v];
}

std::optional<NodeId> NetworkSirEngine::infection_source(NodeId v) const {
    if (source_.at(v) < 0) return std::nullopt;
    return static_cast<NodeId>(source_[v]);
}

// ------------------------------------------------------------ entry points

NodeStates simulate_network_sir(const StaticGraph& graph, const NetworkSirConfig& cfg, std::size_t steps,
                                const SeedPolicy& seed) {
    require(steps >= 1, "steps must be >= 1", "steps");
    NetworkSirEngine engine(graph, cfg, seed);
    const std::size_t n = graph.n_nodes();
    std::vector<Compartment> history;
    history.reserve((steps + 1) * n);
    history.insert(history.end(), engine.states().begin(), engine.states().end());
    for (std::size_t t = 0; t < steps; ++t) {
        engine.step();
        history.insert(history.end(), engine.states().begin(), engine.states().end());
    }
    return NodeStates(steps + 1, n, std::move(history));
}

std::vector<double> mean_infected_curve(const StaticGraph& graph, const NetworkSirConfig& cfg, std::size_t steps,
                                        const SeedPolicy& seed, std::size_t replicates) {
    require(replicates >= 1, "replicates must be >= 1", "replicates");
    require(steps >= 1, "steps must be >= 1", "steps");
    cfg.validate(graph.n_nodes());
    std::vector<std::vector<double>> per_replicate(replicates, std::vector<double>(steps + 1, 0.0));

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(replicates); ++r) {
        NetworkSirEngine engine(graph, cfg, derive_stream(seed, static_cast<std::uint64_t>(r)));
        auto& curve = per_replicate[static_cast<std::size_t>(r)];
        curve[0] = static_cast<double>(engine.count(Compartment::I));
        for (std::size_t t = 1; t <= steps; ++t) {
            engine.step();
            curve[t] = static_cast<double>(engine.count(Compartment::I));
        }
    }

    std::vector<double> mean(steps + 1, 0.0);
    for (const auto& curve : per_replicate)
        for (std::size_t t = 0; t <= steps; ++t) mean[t] += curve[t];
    for (double& m : mean) m /= static_cast<double>(replicates);
    return mean;
}

DynamicSirResult simulate_dynamic_network_sir(const DynamicGraph& graph, const NetworkSirConfig& cfg,
                                              const SeedPolicy& seed) {
    const std::size_t n = graph.n_nodes();
    const std::size_t T = graph.n_steps();
    cfg.validate(n);
    const std::uint64_t key = rng::stream_key(seed);

    std::vector<Compartment> state(n, Compartment::S);
    std::vector<std::uint64_t> infected_at(n, NetworkSirEngine::kNever);
    std::vector<std::uint64_t> recover_at(n, NetworkSirEngine::kNever);
    DynamicSirResult result;
    result.infection_source.assign(n, -1);
    result.new_infections.assign(T, {});

    auto infect = [&](NodeId v, std::uint64_t t) {
        state[v] = Compartment::I;
        infected_at[v] = t;
        const auto period = geometric_trials(uniform_open_low(key, {kRecoveryDraw, v}), cfg.gamma * cfg.dt);
        recover_at[v] = saturating_add(t, period);
        result.new_infections[t].push_back(v);
    };

    for (NodeId v : cfg.immune) state[v] = Compartment::V;
    std::vector<NodeId> seeds = cfg.initial_infected;
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    for (NodeId v : seeds) infect(v, 0);

    std::vector<Compartment> history;
    history.reserve(T * n);
    history.insert(history.end(), state.begin(), state.end());

    struct Attempt {
        NodeId source;
        double weight;
    };
    for (std::size_t t = 0; t + 1 < T; ++t) {
        const StaticGraph& g = graph.at(t);
        const std::vector<Compartment> before = state;
        const std::uint64_t next = t + 1;
        for (NodeId v = 0; v < n; ++v) {
            if (before[v] == Compartment::I && recover_at[v] == next) state[v] = Compartment::R;
        }
        // Edge u→v is tried once per step while u is infected; with directed
        // graphs the neighbor lists are out-lists, so scan sources.
        std::map<NodeId, std::vector<Attempt>> attempts;
        for (NodeId u = 0; u < n; ++u) {
            if (before[u] != Compartment::I) continue;
            const std::uint64_t trial = next - infected_at[u];
            for (const Neighbor& nb : g.neighbors(u)) {
                if (nb.node == u || before[nb.node] != Compartment::S) continue;
                const double p = -std::expm1(-cfg.dt * cfg.beta * nb.weight);
                if (rng::uniform(key, {kEdgeTrialDraw, u, nb.node, trial}) < p)
                    attempts[nb.node].push_back({u, nb.weight});
            }
        }
        for (auto& [target, list] : attempts) {
            const std::size_t pick = pick_weighted(list, [](const Attempt& a) { return a.weight; },
                                                   rng::uniform(key, {kAttributionDraw, target, next}));
            infect(target, next);
            result.infection_source[target] = list[pick].source;
        }
        history.insert(history.end(), state.begin(), state.end());
    }
    result.states = NodeStates(T, n, std::move(history));
    return result;
}

}  // namespace epikit
