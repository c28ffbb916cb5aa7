#include "epikit/types.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "epikit/error.hpp"

namespace epikit {

char to_char(Compartment c) noexcept {
    static constexpr char kChars[] = {'S', 'E', 'I', 'R', 'V', 'Q'};
    return kChars[static_cast<std::size_t>(c)];
}

std::string_view to_string(Compartment c) noexcept {
    static constexpr std::string_view kNames[] = {"S", "E", "I", "R", "V", "Q"};
    return kNames[static_cast<std::size_t>(c)];
}

Compartment compartment_from_string(std::string_view s) {
    if (s.size() == 1) {
        switch (s[0]) {
            case 'S': return Compartment::S;
            case 'E': return Compartment::E;
            case 'I': return Compartment::I;
            case 'R': return Compartment::R;
            case 'V': return Compartment::V;
            case 'Q': return Compartment::Q;
            default: break;
        }
    }
    fail(ErrorKind::Parse, "unknown compartment label '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- StaticGraph

StaticGraph::StaticGraph(std::size_t n_nodes, std::vector<Edge> edges, bool directed)
    : StaticGraph(n_nodes, std::move(edges), directed, false) {}

StaticGraph StaticGraph::with_self_loops(std::size_t n_nodes, std::vector<Edge> edges, bool directed) {
    return StaticGraph(n_nodes, std::move(edges), directed, true);
}

StaticGraph::StaticGraph(std::size_t n_nodes, std::vector<Edge> edges, bool directed, bool allow_self_loops)
    : n_nodes_(n_nodes), directed_(directed), self_loops_(false), edges_(std::move(edges)) {
    std::vector<std::pair<NodeId, NodeId>> keys;
    keys.reserve(edges_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const Edge& e = edges_[i];
        const std::string where = "edges[" + std::to_string(i) + "]";
        if (e.u >= n_nodes_ || e.v >= n_nodes_)
            fail(ErrorKind::Shape, "edge endpoint out of range (n_nodes=" + std::to_string(n_nodes_) + ")", where);
        if (!std::isfinite(e.w) || e.w < 0.0) fail(ErrorKind::InvalidArgument, "edge weight must be finite and >= 0", where);
        if (e.u == e.v) {
            if (!allow_self_loops) fail(ErrorKind::InvalidArgument, "self-loops are not stored", where);
            self_loops_ = true;
        }
        keys.emplace_back(directed_ ? e.u : std::min(e.u, e.v), directed_ ? e.v : std::max(e.u, e.v));
    }
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
        fail(ErrorKind::InvalidArgument, "duplicate edge", "edges");
    build_adjacency();
}

void StaticGraph::build_adjacency() {
    std::vector<std::size_t> deg(n_nodes_ + 1, 0);
    for (const Edge& e : edges_) {
        ++deg[e.u];
        if (!directed_ && e.u != e.v) ++deg[e.v];
    }
    offsets_.assign(n_nodes_ + 1, 0);
    for (std::size_t v = 0; v < n_nodes_; ++v) offsets_[v + 1] = offsets_[v] + deg[v];
    adjacency_.resize(offsets_[n_nodes_]);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const Edge& e : edges_) {
        adjacency_[fill[e.u]++] = {e.v, e.w};
        if (!directed_ && e.u != e.v) adjacency_[fill[e.v]++] = {e.u, e.w};
    }
    // Neighbor order is by node id so traversal order never depends on edge-list order.
    for (std::size_t v = 0; v < n_nodes_; ++v)
        std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
                  adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]),
                  [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
}

// --------------------------------------------------------------- DynamicGraph

DynamicGraph::DynamicGraph(std::vector<StaticGraph> snapshots) : snapshots_(std::move(snapshots)) {
    if (snapshots_.empty()) fail(ErrorKind::Shape, "dynamic graph needs at least one snapshot", "dynamic_graph");
    for (std::size_t t = 1; t < snapshots_.size(); ++t)
        if (snapshots_[t].n_nodes() != snapshots_[0].n_nodes())
            fail(ErrorKind::Shape, "snapshots disagree on n_nodes",
                 "dynamic_graph[" + std::to_string(t) + "].n_nodes");
}

DynamicGraph DynamicGraph::slice(std::size_t begin, std::size_t end) const {
    return DynamicGraph(std::vector<StaticGraph>(snapshots_.begin() + static_cast<std::ptrdiff_t>(begin),
                                                 snapshots_.begin() + static_cast<std::ptrdiff_t>(end)));
}

// --------------------------------------------------------------- FeaturePanel

FeaturePanel::FeaturePanel(std::size_t n_steps, std::size_t n_nodes, std::size_t n_features, std::vector<double> values)
    : n_steps_(n_steps), n_nodes_(n_nodes), n_features_(n_features), values_(std::move(values)) {
    if (values_.size() != n_steps * n_nodes * n_features)
        fail(ErrorKind::Shape,
             "panel holds " + std::to_string(values_.size()) + " values, shape requires " +
                 std::to_string(n_steps * n_nodes * n_features),
             "panel.values");
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (!std::isfinite(values_[i]))
            fail(ErrorKind::InvalidArgument, "panel values must be finite", "panel.values[" + std::to_string(i) + "]");
}

FeaturePanel FeaturePanel::zeros(std::size_t n_steps, std::size_t n_nodes, std::size_t n_features) {
    return FeaturePanel(n_steps, n_nodes, n_features, std::vector<double>(n_steps * n_nodes * n_features, 0.0));
}

std::vector<double> FeaturePanel::series(std::size_t node, std::size_t feature) const {
    std::vector<double> out(n_steps_);
    for (std::size_t t = 0; t < n_steps_; ++t) out[t] = at(t, node, feature);
    return out;
}

FeaturePanel FeaturePanel::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > n_steps_) fail(ErrorKind::Shape, "panel slice out of range");
    const std::size_t row = n_nodes_ * n_features_;
    return FeaturePanel(end - begin, n_nodes_, n_features_,
                        std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(begin * row),
                                            values_.begin() + static_cast<std::ptrdiff_t>(end * row)));
}

// ----------------------------------------------------------------- NodeStates

NodeStates::NodeStates(std::size_t n_steps, std::size_t n_nodes, std::vector<Compartment> states)
    : n_steps_(n_steps), n_nodes_(n_nodes), states_(std::move(states)) {
    if (states_.size() != n_steps * n_nodes) fail(ErrorKind::Shape, "states shape mismatch", "states");
    for (Compartment c : states_)
        if (static_cast<std::uint8_t>(c) > static_cast<std::uint8_t>(Compartment::Q))
            fail(ErrorKind::InvalidArgument, "invalid compartment label", "states");
}

std::size_t NodeStates::count(std::size_t t, Compartment c) const noexcept {
    const auto r = row(t);
    return static_cast<std::size_t>(std::count(r.begin(), r.end(), c));
}

NodeStates NodeStates::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > n_steps_) fail(ErrorKind::Shape, "states slice out of range");
    return NodeStates(end - begin, n_nodes_,
                      std::vector<Compartment>(states_.begin() + static_cast<std::ptrdiff_t>(begin * n_nodes_),
                                               states_.begin() + static_cast<std::ptrdiff_t>(end * n_nodes_)));
}

// ----------------------------------------------------------------- EpiDataset

EpiDataset::EpiDataset(FeaturePanel panel, std::optional<NodeStates> states, std::optional<StaticGraph> static_graph,
                       std::optional<DynamicGraph> dynamic_graph, SplitFractions split)
    : panel_(std::move(panel)),
      states_(std::move(states)),
      static_graph_(std::move(static_graph)),
      dynamic_graph_(std::move(dynamic_graph)),
      split_(split) {
    const std::size_t n = panel_.n_nodes();
    if (states_) {
        if (states_->n_nodes() != n) fail(ErrorKind::Shape, "states disagree with panel on n_nodes", "states.n_nodes");
        if (states_->n_steps() != panel_.n_steps())
            fail(ErrorKind::Shape, "states disagree with panel on n_steps", "states.n_steps");
    }
    if (static_graph_ && static_graph_->n_nodes() != n)
        fail(ErrorKind::Shape, "static graph disagrees with panel on n_nodes", "static_graph.n_nodes");
    if (dynamic_graph_) {
        if (dynamic_graph_->n_nodes() != n)
            fail(ErrorKind::Shape, "dynamic graph disagrees with panel on n_nodes", "dynamic_graph.n_nodes");
        if (dynamic_graph_->n_steps() != panel_.n_steps())
            fail(ErrorKind::Shape, "dynamic graph disagrees with panel on n_steps", "dynamic_graph.n_steps");
    }
    if (!(split_.train > 0.0 && split_.train < 1.0) || !(split_.val > 0.0 && split_.val < 1.0) ||
        !(split_.train + split_.val < 1.0))
        fail(ErrorKind::InvalidArgument, "split fractions must lie in (0,1) with train+val < 1", "split");
}

EpiDataset EpiDataset::with_panel(FeaturePanel panel) const {
    // Transforms may change the time axis (frequency domain); per-step parts
    // that no longer line up are dropped.
    const bool same_steps = panel.n_steps() == panel_.n_steps();
    return EpiDataset(std::move(panel), same_steps ? states_ : std::nullopt, static_graph_,
                      same_steps ? dynamic_graph_ : std::nullopt, split_);
}

EpiDataset EpiDataset::with_graphs(std::optional<StaticGraph> static_graph,
                                   std::optional<DynamicGraph> dynamic_graph) const {
    return EpiDataset(panel_, states_, std::move(static_graph), std::move(dynamic_graph), split_);
}

EpiDataset EpiDataset::slice(std::size_t begin, std::size_t end) const {
    std::optional<NodeStates> states;
    if (states_) states = states_->slice(begin, end);
    std::optional<DynamicGraph> dyn;
    if (dynamic_graph_) dyn = dynamic_graph_->slice(begin, end);
    return EpiDataset(panel_.slice(begin, end), std::move(states), static_graph_, std::move(dyn), split_);
}

std::size_t EpiDataset::train_steps() const noexcept {
    return split_lengths(panel_.n_steps(), split_).train;
}

SegmentLengths split_lengths(std::size_t n_steps, const SplitFractions& split) {
    // Segment boundaries are floors of the cumulative fractions; the small
    // epsilon absorbs representation error such as 0.7 + 0.2 < 0.9.
    constexpr double eps = 1e-9;
    const double T = static_cast<double>(n_steps);
    const auto train_end = static_cast<std::size_t>(std::floor(split.train * T + eps));
    const auto val_end = static_cast<std::size_t>(std::floor((split.train + split.val) * T + eps));
    const std::size_t te = std::min(train_end, n_steps);
    const std::size_t ve = std::min(std::max(val_end, te), n_steps);
    return {te, ve - te, n_steps - ve};
}

DatasetSplit split_dataset(const EpiDataset& ds) {
    const std::size_t T = ds.panel().n_steps();
    if (T < 3) fail(ErrorKind::InvalidArgument, "degenerate split: need at least 3 steps", "panel.n_steps");
    const SegmentLengths len = split_lengths(T, ds.split());
    if (len.train == 0 || len.val == 0 || len.test == 0)
        fail(ErrorKind::InvalidArgument,
             "degenerate split: segment lengths " + std::to_string(len.train) + "/" + std::to_string(len.val) + "/" +
                 std::to_string(len.test),
             "split");
    return {ds.slice(0, len.train), ds.slice(len.train, len.train + len.val), ds.slice(len.train + len.val, T)};
}

}  // namespace epikit
