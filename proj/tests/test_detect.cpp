#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "epikit/detect.hpp"
#include "epikit/error.hpp"
#include "reference/oracles.hpp"

using namespace epikit;

namespace {

Snapshot all_infected(StaticGraph g) {
    std::vector<NodeId> inf(g.n_nodes());
    std::iota(inf.begin(), inf.end(), NodeId{0});
    return Snapshot{std::move(g), std::move(inf), std::nullopt};
}

StaticGraph path(std::size_t n) {
    std::vector<Edge> e;
    for (NodeId v = 0; v + 1 < n; ++v) e.push_back({v, v + 1, 1.0});
    return StaticGraph(n, e);
}

StaticGraph star(std::size_t leaves) {
    std::vector<Edge> e;
    for (NodeId v = 1; v <= leaves; ++v) e.push_back({0, v, 1.0});
    return StaticGraph(leaves + 1, e);
}

/// Random tree plus extra edges, so always connected.
StaticGraph random_connected(std::size_t n, double extra, RandomStream& rs) {
    const StaticGraph tree = random_tree(n, rs);
    std::vector<Edge> edges = tree.edges();
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            if (std::ranges::none_of(tree.neighbors(u), [&](const Neighbor& nb) { return nb.node == v; }) &&
                rs.uniform() < extra) edges.push_back({u, v, 1.0});
    return StaticGraph(n, edges);
}

/// Connected infected subset grown from a random node.
std::vector<NodeId> grow(const StaticGraph& g, std::size_t size, RandomStream& rs) {
    std::vector<NodeId> inf{static_cast<NodeId>(rs.below(g.n_nodes()))};
    while (inf.size() < size) {
        std::vector<NodeId> frontier;
        for (NodeId u : inf)
            for (const auto& nb : g.neighbors(u))
                if (std::find(inf.begin(), inf.end(), nb.node) == inf.end()) frontier.push_back(nb.node);
        if (frontier.empty()) break;
        inf.push_back(frontier[rs.below(frontier.size())]);
    }
    return inf;
}

void check_score(const SourceScore& sc, const Snapshot& s) {
    double total = 0.0;
    const auto inf = s.infected_set();
    for (NodeId v = 0; v < sc.probs.size(); ++v) {
        CHECK(sc.probs[v] >= 0.0);
        if (!std::binary_search(inf.begin(), inf.end(), v)) CHECK(sc.probs[v] == 0.0);
        total += sc.probs[v];
    }
    CHECK(std::fabs(total - 1.0) <= 1e-9);
}

}  // namespace

TEST_SUITE("detect") {

TEST_CASE("jordan examples") {
    const auto p = jordan_center(all_infected(path(5)));
    CHECK(p.probs == std::vector<double>{0, 0, 1, 0, 0});
    const auto single = jordan_center(Snapshot{path(5), {3}, std::nullopt});
    CHECK(single.probs[3] == 1.0);
    const StaticGraph cycle(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 0, 1.0}});
    for (double x : jordan_center(all_infected(cycle)).probs) CHECK(x == doctest::Approx(0.25));
}

TEST_CASE("rumor examples") {
    const auto p = rumor_centrality(all_infected(path(3)));
    CHECK(p.probs[0] == doctest::Approx(0.25));
    CHECK(p.probs[1] == doctest::Approx(0.5));
    CHECK(p.probs[2] == doctest::Approx(0.25));
    for (std::size_t k = 1; k <= 5; ++k) {
        const Snapshot s = all_infected(star(k));
        const auto sc = rumor_centrality(s);
        const auto bf = reference::rumor_bruteforce(s);
        for (NodeId v = 1; v <= k; ++v) CHECK((k == 1 ? sc.probs[0] == sc.probs[v] : sc.probs[0] > sc.probs[v]));
        for (NodeId v = 0; v <= k; ++v) CHECK(sc.probs[v] == doctest::Approx(bf.probs[v]).epsilon(1e-12));
    }
    CHECK(rumor_centrality(Snapshot{path(4), {2}, std::nullopt}).probs[2] == 1.0);
}

TEST_CASE("disconnected snapshots are rejected") {
    const Snapshot s{path(5), {0, 1, 3}, std::nullopt};
    for (auto* fn : {&jordan_center, &rumor_centrality}) {
        try {
            fn(s);
            FAIL("expected an error");
        } catch (const Error& e) {
            const std::string msg = e.what();
            CHECK(msg.find("disconnected snapshot") != std::string::npos);
            CHECK(msg.find("3") != std::string::npos);
        }
    }
    CHECK(infected_components(s).size() == 2);
    CHECK_THROWS_AS(jordan_center(Snapshot{path(3), {}, std::nullopt}), Error);
    CHECK_THROWS_AS(jordan_center(Snapshot{path(3), {7}, std::nullopt}), Error);
}

TEST_CASE("rumor equals brute force on small trees") {
    RandomStream rs(SeedPolicy{80, 0});
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rs.below(8);
        const StaticGraph tree = random_tree(n, rs);
        const std::size_t k = 1 + rs.below(n);
        const Snapshot s{tree, grow(tree, k, rs), std::nullopt};
        const auto sc = rumor_centrality(s);
        const auto bf = reference::rumor_bruteforce(s);
        check_score(sc, s);
        for (NodeId v = 0; v < n; ++v) CHECK(std::fabs(sc.probs[v] - bf.probs[v]) <= 1e-12 * std::max(1e-300, bf.probs[v]));
    }
}

TEST_CASE("jordan equals brute force on small connected graphs") {
    RandomStream rs(SeedPolicy{81, 0});
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rs.below(12);
        const StaticGraph g = random_connected(n, 0.2 * rs.uniform(), rs);
        const Snapshot s{g, grow(g, 1 + rs.below(n), rs), std::nullopt};
        const auto sc = jordan_center(s);
        check_score(sc, s);
        CHECK(sc.probs == reference::jordan_center(s).probs);
    }
}

TEST_CASE("scores are equivariant under relabeling") {
    RandomStream rs(SeedPolicy{82, 0});
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rs.below(15);
        const StaticGraph g = random_connected(n, 0.15, rs);
        const auto inf = grow(g, 1 + rs.below(n), rs);
        std::vector<NodeId> perm(n);
        std::iota(perm.begin(), perm.end(), NodeId{0});
        for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rs.below(i + 1)]);
        std::vector<Edge> edges;
        for (const Edge& e : g.edges()) edges.push_back({perm[e.u], perm[e.v], e.w});
        std::vector<NodeId> inf2;
        for (NodeId v : inf) inf2.push_back(perm[v]);
        const Snapshot a{g, inf, std::nullopt}, b{StaticGraph(n, edges), inf2, std::nullopt};
        const bool is_tree = g.n_edges() + 1 == n;
        const auto ja = jordan_center(a), jb = jordan_center(b);
        for (NodeId v = 0; v < n; ++v) CHECK(ja.probs[v] == doctest::Approx(jb.probs[perm[v]]));
        if (is_tree) {
            // exact only on trees; on cyclic graphs the spanning tree depends on labels
            const auto ra = rumor_centrality(a), rb = rumor_centrality(b);
            for (NodeId v = 0; v < n; ++v) CHECK(ra.probs[v] == doctest::Approx(rb.probs[perm[v]]));
        }
    }
}

TEST_CASE("rumor on cyclic infected subgraphs is a proper score") {
    RandomStream rs(SeedPolicy{83, 0});
    for (int trial = 0; trial < 30; ++trial) {
        const StaticGraph g = random_connected(20, 0.2, rs);
        const Snapshot s{g, grow(g, 12, rs), std::nullopt};
        check_score(rumor_centrality(s), s);
    }
}

TEST_CASE("monte carlo examples") {
    const Snapshot s{star(5), {0, 1, 2, 3, 4, 5}, 1};
    NetworkSirConfig cfg;
    cfg.beta = 50.0;
    cfg.gamma = 0.0;
    cfg.dt = 1.0;
    const auto sc = monte_carlo_source(s, cfg, 20, {9, 0});
    check_score(sc, s);
    for (NodeId v = 1; v <= 5; ++v) CHECK(sc.probs[0] > sc.probs[v]);

    const Snapshot one{path(4), {2}, 0};
    CHECK(monte_carlo_source(one, cfg, 3, {1, 0}).probs[2] == 1.0);

    cfg.beta = 0.5;
    const Snapshot p{path(6), {1, 2, 3}, 2};
    CHECK(monte_carlo_source(p, cfg, 1, {4, 4}).probs == monte_carlo_source(p, cfg, 1, {4, 4}).probs);
    CHECK_THROWS_AS(monte_carlo_source(Snapshot{path(4), {1}, std::nullopt}, cfg, 3, {1, 0}), Error);
    CHECK_THROWS_AS(monte_carlo_source(one, cfg, 0, {1, 0}), Error);
}

TEST_CASE("evaluation arithmetic") {
    RandomStream rs(SeedPolicy{84, 0});
    std::vector<DetectionCase> cases;
    for (int i = 0; i < 10; ++i) {
        const StaticGraph tree = random_tree(12, rs);
        cases.push_back({Snapshot{tree, grow(tree, 6, rs), std::nullopt}, 0});
        cases.back().true_source = cases.back().snapshot.infected[rs.below(6)];
    }
    const Detector oracle = [&](const Snapshot& s) {
        for (const auto& c : cases)
            if (c.snapshot.infected == s.infected && c.snapshot.graph == s.graph) {
                SourceScore out{std::vector<double>(s.graph.n_nodes(), 0.0)};
                out.probs[c.true_source] = 1.0;
                return out;
            }
        return SourceScore{};
    };
    const auto perfect = evaluate_detector(oracle, cases);
    CHECK(perfect.top1 == 1.0);
    CHECK(perfect.top3 == 1.0);
    CHECK(perfect.mean_rank == 1.0);
    CHECK(perfect.n_cases == 10);

    const Detector uniform = [](const Snapshot& s) {
        SourceScore out{std::vector<double>(s.graph.n_nodes(), 0.0)};
        const auto inf = s.infected_set();
        for (NodeId v : inf) out.probs[v] = 1.0 / static_cast<double>(inf.size());
        return out;
    };
    const auto u = evaluate_detector(uniform, cases);
    CHECK(u.mean_rank == doctest::Approx(3.5));
    CHECK(u.top1 == doctest::Approx(1.0 / 6.0));
    CHECK(u.top3 == doctest::Approx(0.5));

    CHECK_THROWS_AS(evaluate_detector(uniform, {}), Error);
    auto bad = cases;
    bad[0].true_source = 99;
    CHECK_THROWS_AS(evaluate_detector(uniform, bad), Error);
}

TEST_CASE("synthetic harness") {
    const auto cases = synthetic_tree_cases(200, 15, 10, {7, 0});
    REQUIRE(cases.size() == 200);
    for (const auto& c : cases) {
        CHECK(c.snapshot.infected_set().size() == 10);
        CHECK(std::ranges::count(c.snapshot.infected, c.true_source) == 1);
        CHECK(infected_components(c.snapshot).size() == 1);
        CHECK(c.snapshot.observation_time.has_value());
    }
    const auto again = synthetic_tree_cases(200, 15, 10, {7, 0});
    CHECK(again[17].snapshot.infected == cases[17].snapshot.infected);
    const auto rumor = evaluate_detector(rumor_centrality, cases);
    CHECK(rumor.top1 > 0.1);
    const auto jordan = evaluate_detector(jordan_center, cases);
    CHECK(jordan.mean_rank < 5.5);
}

}  // TEST_SUITE
