#include "epikit/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "epikit/error.hpp"

namespace epikit {

StaticGraph random_graph(std::size_t n, double edge_prob, const SeedPolicy& seed) {
    require(n >= 1, "n must be >= 1", "n");
    require(edge_prob >= 0.0 && edge_prob <= 1.0, "edge probability must lie in [0,1]", "edge_prob");
    const std::uint64_t key = rng::stream_key(seed);
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            if (rng::uniform(key, {u, v}) < edge_prob) edges.push_back({u, v, 1.0});
    return StaticGraph(n, std::move(edges));
}

StaticGraph similarity_graph(const FeaturePanel& features, double threshold) {
    require(features.n_steps() == 1, "similarity graph expects a single time step", "features.n_steps");
    require(features.n_features() >= 1, "need at least one feature", "features.n_features");
    require(threshold >= -1.0 && threshold <= 1.0, "threshold must lie in [-1,1]", "threshold");
    const std::size_t n = features.n_nodes();
    const std::size_t f = features.n_features();

    std::vector<double> norms(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        double s = 0.0;
        for (std::size_t k = 0; k < f; ++k) s += features.at(0, v, k) * features.at(0, v, k);
        if (s == 0.0)
            fail(ErrorKind::InvalidArgument, "undefined similarity: node " + std::to_string(v) + " has an all-zero row",
                 "features[" + std::to_string(v) + "]");
        norms[v] = std::sqrt(s);
    }

    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
            double dot = 0.0;
            for (std::size_t k = 0; k < f; ++k) dot += features.at(0, u, k) * features.at(0, v, k);
            const double cosine = std::clamp(dot / (norms[u] * norms[v]), -1.0, 1.0);
            if (cosine >= threshold) edges.push_back({u, v, std::clamp(cosine, 0.0, 1.0)});
        }
    }
    return StaticGraph(n, std::move(edges));
}

void MobilityConfig::validate() const {
    require(n_regions >= 2, "need at least 2 regions", "n_regions");
    require(std::isfinite(base_flow) && base_flow >= 0.0, "base_flow must be finite and >= 0", "base_flow");
    require(std::isfinite(distance_decay) && distance_decay > 0.0, "distance_decay must be > 0", "distance_decay");
    require(daily_period > 0, "daily_period must be > 0", "daily_period");
    require(positions.size() == n_regions, "need one position per region", "positions");
    for (std::size_t i = 0; i < positions.size(); ++i)
        require(std::isfinite(positions[i][0]) && std::isfinite(positions[i][1]), "coordinates must be finite",
                "positions[" + std::to_string(i) + "]");
}

double MobilityConfig::weight(std::size_t u, std::size_t v, std::size_t t) const noexcept {
    const double dx = positions[u][0] - positions[v][0];
    const double dy = positions[u][1] - positions[v][1];
    const double distance = std::hypot(dx, dy);
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(t % daily_period) / static_cast<double>(daily_period);
    return base_flow * std::exp(-distance * distance_decay) * (1.0 + 0.5 * std::sin(phase));
}

std::vector<std::array<double, 2>> random_positions(std::size_t n, const SeedPolicy& seed) {
    RandomStream stream(seed);
    std::vector<std::array<double, 2>> out(n);
    for (auto& p : out) {
        p[0] = stream.uniform();
        p[1] = stream.uniform();
    }
    return out;
}

Scenario simulate_scenario(const MobilityConfig& mob, const NetworkSirConfig& epi, std::size_t steps,
                           const SeedPolicy& seed, const std::optional<StaticGraph>& support) {
    mob.validate();
    require(steps >= 1, "steps must be >= 1", "steps");
    const std::size_t n = mob.n_regions;
    if (support) require(support->n_nodes() == n, "support graph must have n_regions nodes", "support.n_nodes");
    epi.validate(n);

    std::vector<std::pair<NodeId, NodeId>> pairs;
    if (support) {
        for (const Edge& e : support->edges()) pairs.emplace_back(std::min(e.u, e.v), std::max(e.u, e.v));
        std::sort(pairs.begin(), pairs.end());
    } else {
        for (NodeId u = 0; u < n; ++u)
            for (NodeId v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
    }

    std::vector<StaticGraph> snapshots;
    snapshots.reserve(steps + 1);
    for (std::size_t t = 0; t <= steps; ++t) {
        std::vector<Edge> edges;
        edges.reserve(pairs.size());
        for (auto [u, v] : pairs) edges.push_back({u, v, mob.weight(u, v, t)});
        snapshots.emplace_back(n, std::move(edges));
    }
    DynamicGraph graph(std::move(snapshots));
    DynamicSirResult sir = simulate_dynamic_network_sir(graph, epi, seed);

    PanelBuilder panel(steps + 1, n, 2);
    for (std::size_t t = 0; t <= steps; ++t) {
        for (std::size_t v = 0; v < n; ++v) panel(t, v, 0) = sir.states.at(t, v) == Compartment::I ? 1.0 : 0.0;
        for (NodeId v : sir.new_infections[t]) panel(t, v, 1) = 1.0;
    }
    return {std::move(graph), std::move(panel).build(), std::move(sir.states)};
}

}  // namespace epikit
