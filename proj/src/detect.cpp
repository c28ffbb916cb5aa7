#include "epikit/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "epikit/error.hpp"

namespace epikit {

std::vector<NodeId> Snapshot::infected_set() const {
    require(!infected.empty(), "infected set must be nonempty", "infected");
    std::vector<NodeId> out = infected;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    require(out.back() < graph.n_nodes(), "infected node " + std::to_string(out.back()) + " out of range", "infected");
    return out;
}

namespace {

/// Infected-induced subgraph with local indices 0..n-1 (members[i] is the
/// graph id of local node i).
struct Induced {
    std::vector<NodeId> members;
    std::vector<std::vector<std::size_t>> adj;
    std::size_t n_edges = 0;
};

Induced induce(const Snapshot& s) {
    Induced ind;
    ind.members = s.infected_set();
    const std::size_t n = ind.members.size();
    std::vector<std::int64_t> local(s.graph.n_nodes(), -1);
    for (std::size_t i = 0; i < n; ++i) local[ind.members[i]] = static_cast<std::int64_t>(i);
    ind.adj.assign(n, {});
    for (const Edge& e : s.graph.edges()) {
        if (e.u == e.v) continue;
        const auto a = local[e.u], b = local[e.v];
        if (a < 0 || b < 0) continue;
        ind.adj[static_cast<std::size_t>(a)].push_back(static_cast<std::size_t>(b));
        ind.adj[static_cast<std::size_t>(b)].push_back(static_cast<std::size_t>(a));
    }
    for (auto& nbrs : ind.adj) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
        ind.n_edges += nbrs.size();
    }
    ind.n_edges /= 2;
    return ind;
}

constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

std::vector<std::size_t> bfs(const Induced& g, std::size_t root, std::vector<std::size_t>* parent = nullptr,
                             std::vector<std::size_t>* order = nullptr) {
    std::vector<std::size_t> dist(g.members.size(), kUnreached);
    if (parent) parent->assign(g.members.size(), kUnreached);
    if (order) order->clear();
    std::queue<std::size_t> q;
    dist[root] = 0;
    q.push(root);
    while (!q.empty()) {
        const std::size_t v = q.front();
        q.pop();
        if (order) order->push_back(v);
        for (std::size_t w : g.adj[v]) {
            if (dist[w] != kUnreached) continue;
            dist[w] = dist[v] + 1;
            if (parent) (*parent)[w] = v;
            q.push(w);
        }
    }
    return dist;
}

std::vector<std::vector<NodeId>> components(const Induced& g) {
    std::vector<std::vector<NodeId>> out;
    std::vector<bool> seen(g.members.size(), false);
    for (std::size_t r = 0; r < g.members.size(); ++r) {
        if (seen[r]) continue;
        std::vector<NodeId> comp;
        const auto dist = bfs(g, r);
        for (std::size_t i = 0; i < dist.size(); ++i)
            if (dist[i] != kUnreached) {
                seen[i] = true;
                comp.push_back(g.members[i]);
            }
        out.push_back(std::move(comp));
    }
    return out;
}

void require_connected(const Induced& g) {
    const auto comps = components(g);
    if (comps.size() <= 1) return;
    std::string listing;
    for (const auto& c : comps) {
        listing += listing.empty() ? "{" : ", {";
        for (std::size_t i = 0; i < c.size(); ++i) listing += (i ? "," : "") + std::to_string(c[i]);
        listing += "}";
    }
    fail(ErrorKind::Runtime, "disconnected snapshot: " + std::to_string(comps.size()) + " components " + listing,
         "infected");
}

SourceScore from_local(const Snapshot& s, const Induced& g, const std::vector<double>& local_probs) {
    SourceScore out;
    out.probs.assign(s.graph.n_nodes(), 0.0);
    for (std::size_t i = 0; i < g.members.size(); ++i) out.probs[g.members[i]] = local_probs[i];
    return out;
}

/// exp-normalize log scores
std::vector<double> softmax(const std::vector<double>& logs) {
    const double top = *std::max_element(logs.begin(), logs.end());
    std::vector<double> p(logs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) total += p[i] = std::exp(logs[i] - top);
    for (double& x : p) x /= total;
    return p;
}

/// Subtree sizes of the BFS tree rooted at `root`.
std::vector<std::size_t> subtree_sizes(const Induced& g, std::size_t root, std::vector<std::size_t>* parent_out = nullptr) {
    std::vector<std::size_t> parent, order;
    bfs(g, root, &parent, &order);
    std::vector<std::size_t> size(g.members.size(), 1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if (*it != root) size[parent[*it]] += size[*it];
    if (parent_out) *parent_out = std::move(parent);
    return size;
}

}  // namespace

std::vector<std::vector<NodeId>> infected_components(const Snapshot& s) { return components(induce(s)); }

SourceScore jordan_center(const Snapshot& s) {
    const Induced g = induce(s);
    require_connected(g);
    const std::size_t n = g.members.size();
    std::vector<std::size_t> ecc(n, 0);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        const auto dist = bfs(g, static_cast<std::size_t>(i));
        ecc[static_cast<std::size_t>(i)] = *std::max_element(dist.begin(), dist.end());
    }
    const std::size_t best = *std::min_element(ecc.begin(), ecc.end());
    const auto winners = static_cast<double>(std::count(ecc.begin(), ecc.end(), best));
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = ecc[i] == best ? 1.0 / winners : 0.0;
    return from_local(s, g, p);
}

SourceScore rumor_centrality(const Snapshot& s) {
    const Induced g = induce(s);
    require_connected(g);
    const std::size_t n = g.members.size();
    const double log_n_factorial = std::lgamma(static_cast<double>(n) + 1.0);
    std::vector<double> log_r(n, 0.0);

    if (g.n_edges + 1 == n) {
        // Tree: R(child) = R(parent) · T_child / (n − T_child), sizes taken
        // with the tree rooted at node 0.
        std::vector<std::size_t> parent, order;
        bfs(g, 0, &parent, &order);
        const auto size = subtree_sizes(g, 0);
        double root = log_n_factorial;
        for (std::size_t v = 0; v < n; ++v) root -= std::log(static_cast<double>(size[v]));
        log_r[0] = root;
        for (std::size_t v : order) {
            if (v == 0) continue;
            const auto t = static_cast<double>(size[v]);
            log_r[v] = log_r[parent[v]] + std::log(t) - std::log(static_cast<double>(n) - t);
        }
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t vi = 0; vi < static_cast<std::int64_t>(n); ++vi) {
            const auto size = subtree_sizes(g, static_cast<std::size_t>(vi));
            double lr = log_n_factorial;
            for (std::size_t u = 0; u < n; ++u) lr -= std::log(static_cast<double>(size[u]));
            log_r[static_cast<std::size_t>(vi)] = lr;
        }
    }
    return from_local(s, g, softmax(log_r));
}

SourceScore monte_carlo_source(const Snapshot& s, const NetworkSirConfig& cfg, std::size_t replicates,
                               const SeedPolicy& seed) {
    require(s.observation_time.has_value(), "observation_time missing", "observation_time");
    require(replicates >= 1, "replicates must be >= 1", "replicates");
    const std::vector<NodeId> observed = s.infected_set();
    const std::size_t n_candidates = observed.size();
    const std::size_t horizon = *s.observation_time;

    std::vector<char> in_observed(s.graph.n_nodes(), 0);
    for (NodeId v : observed) in_observed[v] = 1;

    // Validate once up front so worker threads never throw.
    {
        NetworkSirConfig probe = cfg;
        probe.initial_infected = {observed.front()};
        probe.immune.erase(std::remove(probe.immune.begin(), probe.immune.end(), observed.front()), probe.immune.end());
        probe.validate(s.graph.n_nodes());
    }

    std::vector<double> jaccard(n_candidates * replicates, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t job = 0; job < static_cast<std::int64_t>(jaccard.size()); ++job) {
        const std::size_t ci = static_cast<std::size_t>(job) / replicates;
        const std::size_t r = static_cast<std::size_t>(job) % replicates;
        const NodeId candidate = observed[ci];
        NetworkSirConfig run = cfg;
        run.initial_infected = {candidate};
        run.immune.erase(std::remove(run.immune.begin(), run.immune.end(), candidate), run.immune.end());
        NetworkSirEngine engine(s.graph, run, derive_stream(seed, static_cast<std::uint64_t>(candidate) * replicates + r));
        for (std::size_t t = 0; t < horizon; ++t) engine.step();
        std::size_t inter = 0, uni = observed.size();
        const auto& st = engine.states();
        for (std::size_t v = 0; v < st.size(); ++v) {
            const bool hit = st[v] == Compartment::I || st[v] == Compartment::R ||
                             (st[v] == Compartment::Q && engine.infection_step(static_cast<NodeId>(v)).has_value());
            if (!hit) continue;
            if (in_observed[v]) ++inter;
            else ++uni;
        }
        jaccard[static_cast<std::size_t>(job)] = static_cast<double>(inter) / static_cast<double>(uni);
    }

    std::vector<double> score(n_candidates, 0.0);
    for (std::size_t ci = 0; ci < n_candidates; ++ci) {
        for (std::size_t r = 0; r < replicates; ++r) score[ci] += jaccard[ci * replicates + r];
        score[ci] /= static_cast<double>(replicates);
    }
    double total = 0.0;
    for (double x : score) total += x;
    SourceScore out;
    out.probs.assign(s.graph.n_nodes(), 0.0);
    for (std::size_t ci = 0; ci < n_candidates; ++ci)
        out.probs[observed[ci]] = total > 0.0 ? score[ci] / total : 1.0 / static_cast<double>(n_candidates);
    return out;
}

DetectionReport evaluate_detector(const Detector& detector, const std::vector<DetectionCase>& cases) {
    require(!cases.empty(), "need at least one case", "cases");
    DetectionReport report;
    report.n_cases = cases.size();
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const DetectionCase& c = cases[i];
        require(c.true_source < c.snapshot.graph.n_nodes(), "true_source not in graph",
                "cases[" + std::to_string(i) + "].true_source");
        const SourceScore score = detector(c.snapshot);
        const double mine = score.probs.at(c.true_source);
        // ranked among the infected candidates (plus the true source)
        std::vector<NodeId> candidates = c.snapshot.infected_set();
        if (!std::binary_search(candidates.begin(), candidates.end(), c.true_source))
            candidates.push_back(c.true_source);
        std::size_t greater = 0, equal = 0;
        for (NodeId v : candidates) {
            const double p = score.probs.at(v);
            if (p > mine) ++greater;
            else if (p == mine) ++equal;
        }
        const auto g = static_cast<double>(greater), e = static_cast<double>(equal);
        auto credit = [&](double k) { return std::clamp(k - g, 0.0, e) / e; };
        report.top1 += credit(1.0);
        report.top3 += credit(3.0);
        report.mean_rank += g + (e + 1.0) / 2.0;
    }
    const auto n = static_cast<double>(cases.size());
    report.top1 /= n;
    report.top3 /= n;
    report.mean_rank /= n;
    return report;
}

StaticGraph random_tree(std::size_t n, RandomStream& stream) {
    require(n >= 1, "tree needs at least one node", "n");
    if (n == 1) return StaticGraph(1, {});
    if (n == 2) return StaticGraph(2, {{0, 1, 1.0}});
    std::vector<NodeId> prufer(n - 2);
    for (auto& x : prufer) x = static_cast<NodeId>(stream.below(n));
    std::vector<std::size_t> degree(n, 1);
    for (NodeId x : prufer) ++degree[x];
    std::vector<Edge> edges;
    std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> leaves;
    for (NodeId v = 0; v < n; ++v)
        if (degree[v] == 1) leaves.push(v);
    for (NodeId x : prufer) {
        const NodeId leaf = leaves.top();
        leaves.pop();
        edges.push_back({std::min(leaf, x), std::max(leaf, x), 1.0});
        if (--degree[x] == 1) leaves.push(x);
    }
    const NodeId a = leaves.top();
    leaves.pop();
    const NodeId b = leaves.top();
    edges.push_back({std::min(a, b), std::max(a, b), 1.0});
    return StaticGraph(n, std::move(edges));
}

std::vector<DetectionCase> synthetic_tree_cases(std::size_t count, std::size_t n_nodes, std::size_t infected_size,
                                                const SeedPolicy& seed) {
    require(infected_size >= 1 && infected_size <= n_nodes, "infected_size must lie in [1, n_nodes]", "infected_size");
    std::vector<DetectionCase> cases;
    cases.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        RandomStream stream(derive_stream(seed, i));
        StaticGraph tree = random_tree(n_nodes, stream);
        const auto source = static_cast<NodeId>(stream.below(n_nodes));
        std::vector<char> infected(n_nodes, 0);
        infected[source] = 1;
        std::vector<NodeId> members{source};
        double elapsed = 0.0;
        while (members.size() < infected_size) {
            std::vector<NodeId> frontier;  // one entry per boundary edge
            for (NodeId u : members)
                for (const Neighbor& nb : tree.neighbors(u))
                    if (!infected[nb.node]) frontier.push_back(nb.node);
            // With unit-rate clocks the next infection arrives after an
            // Exp(|boundary|) wait through a uniformly chosen boundary edge.
            elapsed += -std::log(rng::to_unit_open_low(stream.next_u64())) / static_cast<double>(frontier.size());
            const NodeId next = frontier[stream.below(frontier.size())];
            infected[next] = 1;
            members.push_back(next);
        }
        std::sort(members.begin(), members.end());
        Snapshot snap{std::move(tree), std::move(members), static_cast<std::size_t>(std::ceil(elapsed))};
        cases.push_back({std::move(snap), source});
    }
    return cases;
}

}  // namespace epikit
