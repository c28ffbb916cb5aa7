#include <doctest.h>

#include "epikit/error.hpp"
#include "epikit/rng.hpp"
#include "epikit/types.hpp"

using namespace epikit;

namespace {

FeaturePanel ramp(std::size_t steps, std::size_t nodes, std::size_t features) {
    PanelBuilder b(steps, nodes, features);
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t v = 0; v < nodes; ++v)
            for (std::size_t f = 0; f < features; ++f) b(t, v, f) = static_cast<double>(100 * t + 10 * v + f);
    return std::move(b).build();
}

}  // namespace

TEST_SUITE("types") {

TEST_CASE("graph rejects invalid edges") {
    CHECK_THROWS_AS(StaticGraph(3, {{0, 3, 1.0}}), Error);
    CHECK_THROWS_AS(StaticGraph(3, {{1, 1, 1.0}}), Error);
    CHECK_THROWS_AS(StaticGraph(3, {{0, 1, -0.5}}), Error);
    CHECK_THROWS_AS(StaticGraph(3, {{0, 1, std::nan("")}}), Error);
    CHECK_THROWS_AS(StaticGraph(3, {{0, 1, 1.0}, {1, 0, 2.0}}), Error);
    CHECK_NOTHROW(StaticGraph(3, {{0, 1, 1.0}, {1, 0, 2.0}}, true));
}

TEST_CASE("undirected neighbors are symmetric and sorted") {
    const StaticGraph g(5, {{3, 1, 2.0}, {0, 3, 1.0}, {4, 3, 0.5}});
    REQUIRE(g.degree(3) == 3);
    const auto nb = g.neighbors(3);
    CHECK(nb[0].node == 0);
    CHECK(nb[1].node == 1);
    CHECK(nb[1].weight == 2.0);
    CHECK(nb[2].node == 4);
    CHECK(g.degree(1) == 1);
    CHECK(g.neighbors(1)[0].node == 3);
    CHECK(g.degree(2) == 0);
    CHECK_FALSE(g.has_self_loops());
}

TEST_CASE("self loops only through the transform factory") {
    const StaticGraph g = StaticGraph::with_self_loops(2, {{0, 0, 1.0}, {0, 1, 1.0}});
    CHECK(g.has_self_loops());
    CHECK(g.degree(0) == 2);
}

TEST_CASE("dynamic graph snapshots share n_nodes") {
    CHECK_THROWS_AS(DynamicGraph({StaticGraph(3, {}), StaticGraph(4, {})}), Error);
    CHECK_THROWS_AS(DynamicGraph(std::vector<StaticGraph>{}), Error);
    const DynamicGraph d({StaticGraph(3, {}), StaticGraph(3, {{0, 1, 1.0}}), StaticGraph(3, {})});
    CHECK(d.slice(1, 2).at(0).n_edges() == 1);
}

TEST_CASE("panel constructor rejects inconsistent shapes") {
    RandomStream rs(SeedPolicy{11, 0});
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t t = 1 + rs.below(6), n = 1 + rs.below(6), f = 1 + rs.below(4);
        const std::size_t wrong = t * n * f + 1 + rs.below(3);
        CHECK_THROWS_AS(FeaturePanel(t, n, f, std::vector<double>(wrong, 0.0)), Error);
        CHECK_THROWS_AS(FeaturePanel(t, n, f, std::vector<double>(t * n * f - 1, 0.0)), Error);
        CHECK_NOTHROW(FeaturePanel(t, n, f, std::vector<double>(t * n * f, 0.0)));
        CHECK_THROWS_AS(NodeStates(t, n, std::vector<Compartment>(t * n + 1, Compartment::S)), Error);
    }
    CHECK_THROWS_AS(FeaturePanel(1, 1, 1, {std::numeric_limits<double>::infinity()}), Error);
}

TEST_CASE("dataset validates node and step counts") {
    const FeaturePanel p = ramp(5, 3, 1);
    CHECK_THROWS_AS(EpiDataset(p, std::nullopt, StaticGraph(4, {}), std::nullopt), Error);
    CHECK_THROWS_AS(EpiDataset(p, NodeStates(4, 3, std::vector<Compartment>(12, Compartment::S)), std::nullopt,
                               std::nullopt),
                    Error);
    CHECK_THROWS_AS(EpiDataset(p, std::nullopt, std::nullopt, DynamicGraph({StaticGraph(3, {})})), Error);
    CHECK_THROWS_AS(EpiDataset(p, std::nullopt, std::nullopt, std::nullopt, SplitFractions{0.7, 0.3}), Error);
    CHECK_THROWS_AS(EpiDataset(p, std::nullopt, std::nullopt, std::nullopt, SplitFractions{0.0, 0.3}), Error);
    try {
        EpiDataset(p, std::nullopt, StaticGraph(4, {}), std::nullopt);
    } catch (const Error& e) {
        CHECK(e.field() == "static_graph.n_nodes");
    }
}

TEST_CASE("split lengths") {
    auto lengths = [](std::size_t t, double a, double b) {
        const auto s = split_lengths(t, {a, b});
        return std::vector<std::size_t>{s.train, s.val, s.test};
    };
    CHECK(lengths(10, 0.5, 0.2) == std::vector<std::size_t>{5, 2, 3});
    CHECK(lengths(3, 0.34, 0.33) == std::vector<std::size_t>{1, 1, 1});
    CHECK(lengths(100, 0.8, 0.1) == std::vector<std::size_t>{80, 10, 10});
}

TEST_CASE("split is chronological and round-trips") {
    const FeaturePanel p = ramp(100, 2, 2);
    std::vector<Compartment> labels(100 * 2, Compartment::S);
    std::vector<StaticGraph> snaps(100, StaticGraph(2, {}));
    const EpiDataset ds(p, NodeStates(100, 2, labels), StaticGraph(2, {{0, 1, 1.0}}), DynamicGraph(snaps),
                        SplitFractions{0.8, 0.1});
    const DatasetSplit s = split_dataset(ds);
    CHECK(s.train.panel().n_steps() == 80);
    CHECK(s.val.panel().n_steps() == 10);
    CHECK(s.test.panel().n_steps() == 10);
    CHECK(s.test.panel() == p.slice(90, 100));
    CHECK(s.test.states()->n_steps() == 10);
    CHECK(s.test.dynamic_graph()->n_steps() == 10);
    CHECK(s.test.static_graph() == ds.static_graph());

    std::vector<double> joined;
    for (const auto* part : {&s.train, &s.val, &s.test})
        joined.insert(joined.end(), part->panel().values().begin(), part->panel().values().end());
    CHECK(joined == p.values());
}

TEST_CASE("degenerate split") {
    const EpiDataset ds(ramp(4, 1, 1), std::nullopt, std::nullopt, std::nullopt, SplitFractions{0.2, 0.2});
    CHECK_THROWS_WITH_AS(split_dataset(ds), doctest::Contains("degenerate split"), Error);
    const EpiDataset tiny(ramp(2, 1, 1), std::nullopt, std::nullopt, std::nullopt, SplitFractions{0.4, 0.3});
    CHECK_THROWS_AS(split_dataset(tiny), Error);
}

TEST_CASE("compartment labels") {
    for (auto c : {Compartment::S, Compartment::E, Compartment::I, Compartment::R, Compartment::V, Compartment::Q})
        CHECK(compartment_from_string(to_string(c)) == c);
    CHECK_THROWS_AS(compartment_from_string("X"), Error);
}

}  // TEST_SUITE
