#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "epikit/network_sir.hpp"
#include "epikit/rng.hpp"
#include "epikit/types.hpp"

namespace epikit {

/// Contact graph plus the observed infected set.
struct Snapshot {
    StaticGraph graph;
    std::vector<NodeId> infected;
    std::optional<std::size_t> observation_time;

    /// Sorted, deduplicated infected ids; throws on empty or out-of-range sets.
    std::vector<NodeId> infected_set() const;
};

/// Probability over graph nodes of being the source; zero outside the
/// infected set.
struct SourceScore {
    std::vector<double> probs;
};

/// Connected components of the infected-induced subgraph (edges treated as
/// undirected), each sorted, ordered by smallest member.
std::vector<std::vector<NodeId>> infected_components(const Snapshot& s);

/// Uniform mass over the infected nodes of minimum eccentricity (BFS hops
/// inside the infected-induced subgraph).
SourceScore jordan_center(const Snapshot& s);

/// Rumor centrality R(v) = n!·Π_u 1/T_u^v, normalized over infected nodes.
/// Exact on trees (rerooting, O(n) total); on infected subgraphs with cycles
/// each candidate is scored on its own BFS spanning tree.
SourceScore rumor_centrality(const Snapshot& s);

/// Simulation likelihood: for each infected candidate v, `replicates`
/// NetworkSIR runs seeded at v for observation_time steps; score(v) is the
/// mean Jaccard similarity between the simulated ever-infected set (I or R)
/// and the observed set. Candidate v, replicate r uses stream
/// derive_stream(seed, v·replicates + r). `cfg.initial_infected` is ignored.
SourceScore monte_carlo_source(const Snapshot& s, const NetworkSirConfig& cfg, std::size_t replicates,
                               const SeedPolicy& seed);

struct DetectionCase {
    Snapshot snapshot;
    NodeId true_source = 0;
};

struct DetectionReport {
    double top1 = 0.0;
    double top3 = 0.0;
    double mean_rank = 0.0;
    std::size_t n_cases = 0;
};

using Detector = std::function<SourceScore(const Snapshot&)>;

/// The true source is ranked among the infected nodes. Ties: a true source
/// tied with e nodes after g strictly better ones has rank g + (e+1)/2 and
/// earns top-k credit clamp(k − g, 0, e)/e.
DetectionReport evaluate_detector(const Detector& detector, const std::vector<DetectionCase>& cases);

/// Uniformly random labeled tree (Prüfer sequence).
StaticGraph random_tree(std::size_t n, RandomStream& stream);

/// Synthetic harness: `count` random trees on `n_nodes` nodes, a uniformly
/// drawn source, and SI spread with unit-rate exponential edge clocks until
/// `infected_size` nodes are infected. observation_time is the elapsed time
/// rounded up to whole steps. Case i draws from derive_stream(seed, i).
std::vector<DetectionCase> synthetic_tree_cases(std::size_t count, std::size_t n_nodes, std::size_t infected_size,
                                                const SeedPolicy& seed);

}  // namespace epikit
