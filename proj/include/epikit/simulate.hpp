#pragma once

#include <array>
#include <optional>
#include <vector>

#include "epikit/network_sir.hpp"
#include "epikit/rng.hpp"
#include "epikit/types.hpp"

namespace epikit {

/// Erdős–Rényi G(n, p) with unit weights. Pair (u, v) is kept iff a
/// counter-based uniform keyed by the pair falls below p, so the result does
/// not depend on iteration order.
StaticGraph random_graph(std::size_t n, double edge_prob, const SeedPolicy& seed);

/// Edge (u, v) iff cosine(x_u, x_v) ≥ threshold, weighted by the cosine
/// clamped to [0, 1]. `features` must hold a single time step.
StaticGraph similarity_graph(const FeaturePanel& features, double threshold = 0.5);

/// Gravity-style mobility: w_uv(t) = base_flow · exp(−d(u,v)·distance_decay)
/// · (1 + 0.5·sin(2πt/daily_period)).
struct MobilityConfig {
    std::size_t n_regions = 2;
    double base_flow = 1.0;
    double distance_decay = 1.0;
    std::size_t daily_period = 24;
    std::vector<std::array<double, 2>> positions;

    void validate() const;
    double weight(std::size_t u, std::size_t v, std::size_t t) const noexcept;
};

/// Region coordinates uniform in the unit square.
std::vector<std::array<double, 2>> random_positions(std::size_t n, const SeedPolicy& seed);

struct Scenario {
    DynamicGraph graph;  // steps+1 snapshots
    FeaturePanel panel;  // [steps+1][n_regions][2]: infected indicator, new infection at t
    NodeStates states;   // [steps+1][n_regions]
};

/// Mobility-weighted NetworkSIR. Flows exist between every pair of regions,
/// or only along the edges of `support` when given.
Scenario simulate_scenario(const MobilityConfig& mob, const NetworkSirConfig& epi, std::size_t steps,
                           const SeedPolicy& seed, const std::optional<StaticGraph>& support = std::nullopt);

}  // namespace epikit
