#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace epikit {

using NodeId = std::uint32_t;

/// Compartment alphabet shared by every simulator and dataset.
enum class Compartment : std::uint8_t { S = 0, E, I, R, V, Q };

char to_char(Compartment c) noexcept;
std::string_view to_string(Compartment c) noexcept;
Compartment compartment_from_string(std::string_view s);

struct Edge {
    NodeId u = 0;
    NodeId v = 0;
    double w = 1.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
    NodeId node;
    double weight;
};

/// Weighted contact structure. Adjacency is built once at construction;
/// undirected edges appear in both endpoints' neighbor lists.
class StaticGraph {
public:
    StaticGraph() = default;
    /// Rejects out-of-range ids, self-loops, duplicate edges and negative or
    /// non-finite weights.
    StaticGraph(std::size_t n_nodes, std::vector<Edge> edges, bool directed = false);

    /// Graph that may carry self-loops; only produced by graph transforms.
    static StaticGraph with_self_loops(std::size_t n_nodes, std::vector<Edge> edges, bool directed = false);

    std::size_t n_nodes() const noexcept { return n_nodes_; }
    bool directed() const noexcept { return directed_; }
    bool has_self_loops() const noexcept { return self_loops_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::size_t n_edges() const noexcept { return edges_.size(); }

    /// Out-neighbors (all neighbors when undirected).
    std::span<const Neighbor> neighbors(NodeId v) const noexcept {
        return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
    }
    std::size_t degree(NodeId v) const noexcept { return offsets_[v + 1] - offsets_[v]; }

    friend bool operator==(const StaticGraph& a, const StaticGraph& b) {
        return a.n_nodes_ == b.n_nodes_ && a.directed_ == b.directed_ && a.edges_ == b.edges_;
    }

private:
    StaticGraph(std::size_t n_nodes, std::vector<Edge> edges, bool directed, bool allow_self_loops);
    void build_adjacency();

    std::size_t n_nodes_ = 0;
    bool directed_ = false;
    bool self_loops_ = false;
    std::vector<Edge> edges_;
    std::vector<std::size_t> offsets_{0};
    std::vector<Neighbor> adjacency_;
};

class DynamicGraph {
public:
    DynamicGraph() = default;
    explicit DynamicGraph(std::vector<StaticGraph> snapshots);

    std::size_t n_steps() const noexcept { return snapshots_.size(); }
    std::size_t n_nodes() const noexcept { return snapshots_.empty() ? 0 : snapshots_.front().n_nodes(); }
    const StaticGraph& at(std::size_t t) const { return snapshots_.at(t); }
    const std::vector<StaticGraph>& snapshots() const noexcept { return snapshots_; }

    DynamicGraph slice(std::size_t begin, std::size_t end) const;

    friend bool operator==(const DynamicGraph&, const DynamicGraph&) = default;

private:
    std::vector<StaticGraph> snapshots_;
};

/// Dense [t][node][feature] observations, row-major.
class FeaturePanel {
public:
    FeaturePanel() = default;
    FeaturePanel(std::size_t n_steps, std::size_t n_nodes, std::size_t n_features, std::vector<double> values);
    static FeaturePanel zeros(std::size_t n_steps, std::size_t n_nodes, std::size_t n_features);

    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t n_nodes() const noexcept { return n_nodes_; }
    std::size_t n_features() const noexcept { return n_features_; }
    const std::vector<double>& values() const noexcept { return values_; }

    std::size_t index(std::size_t t, std::size_t node, std::size_t feature) const noexcept {
        return (t * n_nodes_ + node) * n_features_ + feature;
    }
    double at(std::size_t t, std::size_t node, std::size_t feature) const noexcept {
        return values_[index(t, node, feature)];
    }

    /// Copy of one (node, feature) channel along time.
    std::vector<double> series(std::size_t node, std::size_t feature) const;
    FeaturePanel slice(std::size_t begin, std::size_t end) const;

    friend bool operator==(const FeaturePanel&, const FeaturePanel&) = default;

private:
    std::size_t n_steps_ = 0;
    std::size_t n_nodes_ = 0;
    std::size_t n_features_ = 0;
    std::vector<double> values_;
};

/// Mutable builder for FeaturePanel; validated when frozen.
class PanelBuilder {
public:
    PanelBuilder(std::size_t n_steps, std::size_t n_nodes, std::size_t n_features)
        : n_steps_(n_steps), n_nodes_(n_nodes), n_features_(n_features), values_(n_steps * n_nodes * n_features, 0.0) {}

    double& operator()(std::size_t t, std::size_t node, std::size_t feature) noexcept {
        return values_[(t * n_nodes_ + node) * n_features_ + feature];
    }
    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t n_nodes() const noexcept { return n_nodes_; }
    std::size_t n_features() const noexcept { return n_features_; }

    FeaturePanel build() && { return FeaturePanel(n_steps_, n_nodes_, n_features_, std::move(values_)); }

private:
    std::size_t n_steps_, n_nodes_, n_features_;
    std::vector<double> values_;
};

class NodeStates {
public:
    NodeStates() = default;
    NodeStates(std::size_t n_steps, std::size_t n_nodes, std::vector<Compartment> states);

    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t n_nodes() const noexcept { return n_nodes_; }
    Compartment at(std::size_t t, std::size_t node) const noexcept { return states_[t * n_nodes_ + node]; }
    std::span<const Compartment> row(std::size_t t) const noexcept {
        return {states_.data() + t * n_nodes_, n_nodes_};
    }
    const std::vector<Compartment>& data() const noexcept { return states_; }
    std::size_t count(std::size_t t, Compartment c) const noexcept;

    NodeStates slice(std::size_t begin, std::size_t end) const;

    friend bool operator==(const NodeStates&, const NodeStates&) = default;

private:
    std::size_t n_steps_ = 0;
    std::size_t n_nodes_ = 0;
    std::vector<Compartment> states_;
};

struct SplitFractions {
    double train = 0.7;
    double val = 0.1;

    friend bool operator==(const SplitFractions&, const SplitFractions&) = default;
};

/// Panel plus optional node states and graphs. Node counts and step counts
/// of the optional parts must agree with the panel.
class EpiDataset {
public:
    EpiDataset() = default;
    EpiDataset(FeaturePanel panel, std::optional<NodeStates> states, std::optional<StaticGraph> static_graph,
               std::optional<DynamicGraph> dynamic_graph, SplitFractions split = {});

    const FeaturePanel& panel() const noexcept { return panel_; }
    const std::optional<NodeStates>& states() const noexcept { return states_; }
    const std::optional<StaticGraph>& static_graph() const noexcept { return static_graph_; }
    const std::optional<DynamicGraph>& dynamic_graph() const noexcept { return dynamic_graph_; }
    const SplitFractions& split() const noexcept { return split_; }

    EpiDataset with_panel(FeaturePanel panel) const;
    EpiDataset with_graphs(std::optional<StaticGraph> static_graph, std::optional<DynamicGraph> dynamic_graph) const;
    EpiDataset slice(std::size_t begin, std::size_t end) const;

    /// Number of leading steps forming the training segment.
    std::size_t train_steps() const noexcept;

    friend bool operator==(const EpiDataset&, const EpiDataset&) = default;

private:
    FeaturePanel panel_;
    std::optional<NodeStates> states_;
    std::optional<StaticGraph> static_graph_;
    std::optional<DynamicGraph> dynamic_graph_;
    SplitFractions split_;
};

struct DatasetSplit {
    EpiDataset train;
    EpiDataset val;
    EpiDataset test;
};

/// Chronological train/val/test partition.
DatasetSplit split_dataset(const EpiDataset& ds);

struct SegmentLengths {
    std::size_t train, val, test;
};
SegmentLengths split_lengths(std::size_t n_steps, const SplitFractions& split);

}  // namespace epikit
