#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "epikit/rng.hpp"
#include "epikit/types.hpp"

namespace epikit {

struct NetworkSirConfig {
    double beta = 0.0;   // per-contact transmission rate
    double gamma = 0.0;  // recovery rate
    double dt = 1.0;
    std::vector<NodeId> initial_infected;
    std::vector<NodeId> immune;  // start as V and never change

    /// Throws Error naming the offending field.
    void validate(std::size_t n_nodes) const;
};

/// Discrete-time stochastic SIR on a weighted static graph.
///
/// A susceptible node v is infected during a step with probability
/// 1 − exp(−dt·β·Σ w_uv) over its infected neighbors u; an infected node
/// recovers with probability 1 − exp(−γ·dt). The chain is realized by drawing,
/// once per infected node, the number of steps until recovery and, once per
/// edge u→v, the number of trials until transmission (both geometric, from
/// counter-based uniforms). Independent per-edge per-step trials give the
/// aggregate infection probability above, and the realization is monotone in β
/// under a fixed seed.
///
/// Interventions queued with vaccinate/quarantine take effect at the start of
/// the next step: vaccination turns an S node into V; quarantine turns any
/// other non-V node into Q, which neither infects nor is infected and never
/// recovers. Nodes already V or Q are left unchanged.
class NetworkSirEngine {
public:
    static constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

    /// `graph` must outlive the engine.
    NetworkSirEngine(const StaticGraph& graph, const NetworkSirConfig& cfg, const SeedPolicy& seed);

    /// Advances one step and returns the nodes whose state changed.
    std::vector<NodeId> step();

    void vaccinate(NodeId node);
    void quarantine(NodeId node);

    std::uint64_t current_step() const noexcept { return step_; }
    const std::vector<Compartment>& states() const noexcept { return current_; }
    std::size_t count(Compartment c) const noexcept;
    /// No node is in state I.
    bool finished() const noexcept { return count(Compartment::I) == 0; }

    /// Step at which the node became infected (0 for initial infections).
    std::optional<std::uint64_t> infection_step(NodeId v) const;
    /// Neighbor whose transmission infected v; empty for initial infections.
    std::optional<NodeId> infection_source(NodeId v) const;

    /// Number of infectious steps drawn for node u (kNever when γ·dt = 0).
    std::uint64_t infectious_period(NodeId u) const noexcept;
    /// Trials until u would transmit to v over an edge of weight w.
    std::uint64_t transmission_delay(NodeId u, NodeId v, double w) const noexcept;

private:
    struct Event {
        enum Kind : std::uint8_t { Recover, Infect } kind;
        NodeId target;
        NodeId source;
        double weight;
    };

    void infect(NodeId v, std::optional<NodeId> source);
    void schedule(std::uint64_t at, Event e);

    const StaticGraph* graph_;
    NetworkSirConfig cfg_;
    std::uint64_t key_;
    std::uint64_t step_ = 0;
    std::vector<Compartment> current_;
    std::vector<std::uint64_t> infected_at_;
    std::vector<std::int64_t> source_;  // -1: none
    std::map<std::uint64_t, std::vector<Event>> events_;
    std::vector<std::pair<NodeId, bool>> pending_;  // (node, is_quarantine)
};

/// Full state history [steps+1][n_nodes], including the initial state.
NodeStates simulate_network_sir(const StaticGraph& graph, const NetworkSirConfig& cfg, std::size_t steps,
                                const SeedPolicy& seed);

/// Geometric draw: 1 + ⌊−ln(U)/(rate·dt)⌋ for U ∈ (0,1]; kNever when rate·dt = 0.
std::uint64_t geometric_trials(double uniform_open_low, double rate_dt) noexcept;

/// Mean number of infected nodes per step over `replicates` independent runs;
/// replicate r uses stream derive_stream(seed, r). Replicates run in parallel
/// and are reduced in replicate order, so the result does not depend on the
/// thread count.
std::vector<double> mean_infected_curve(const StaticGraph& graph, const NetworkSirConfig& cfg, std::size_t steps,
                                        const SeedPolicy& seed, std::size_t replicates);

struct DynamicSirResult {
    NodeStates states;                         // [n_steps][n_nodes]
    std::vector<std::vector<NodeId>> new_infections;  // per step t: nodes that became I at t
    std::vector<std::int64_t> infection_source;       // per node, -1 when none
};

/// NetworkSIR over time-varying weights: the transition t→t+1 uses the weights
/// of snapshot t. Each edge trial is drawn separately (trial k of edge u→v is a
/// counter-based uniform keyed by (u, v, k)); recovery periods use the same
/// draws as NetworkSirEngine.
DynamicSirResult simulate_dynamic_network_sir(const DynamicGraph& graph, const NetworkSirConfig& cfg,
                                              const SeedPolicy& seed);

}  // namespace epikit
