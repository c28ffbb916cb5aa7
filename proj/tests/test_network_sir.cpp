#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "epikit/error.hpp"
#include "epikit/network_sir.hpp"
#include "epikit/simulate.hpp"
#include "reference/oracles.hpp"

using namespace epikit;

namespace {

NetworkSirConfig sir(double beta, double gamma, std::vector<NodeId> seeds, double dt = 1.0) {
    NetworkSirConfig c;
    c.beta = beta;
    c.gamma = gamma;
    c.dt = dt;
    c.initial_infected = std::move(seeds);
    return c;
}

std::set<NodeId> ever_infected(const NodeStates& s) {
    std::set<NodeId> out;
    for (std::size_t t = 0; t < s.n_steps(); ++t)
        for (std::size_t v = 0; v < s.n_nodes(); ++v)
            if (s.at(t, v) == Compartment::I || s.at(t, v) == Compartment::R) out.insert(static_cast<NodeId>(v));
    return out;
}

StaticGraph path(std::size_t n) {
    std::vector<Edge> e;
    for (NodeId v = 0; v + 1 < n; ++v) e.push_back({v, v + 1, 1.0});
    return StaticGraph(n, e);
}

}  // namespace

TEST_SUITE("network_sir") {

TEST_CASE("zero transmission") {
    const StaticGraph g = random_graph(40, 0.2, {1, 0});
    const NodeStates s = simulate_network_sir(g, sir(0.0, 0.2, {0, 5, 9}), 50, {3, 0});
    CHECK(s.count(0, Compartment::I) == 3);
    for (std::size_t t = 1; t < s.n_steps(); ++t) {
        CHECK(s.count(t, Compartment::I) <= s.count(t - 1, Compartment::I));
        CHECK(s.count(t, Compartment::S) == 37);
    }
}

TEST_CASE("certain spread reaches everyone on a connected graph") {
    const StaticGraph g = path(30);
    NetworkSirConfig c = sir(50.0, 0.0, {0});
    c.immune = {};
    const NodeStates s = simulate_network_sir(g, c, 30, {1, 0});
    CHECK(s.count(29, Compartment::I) == 30);
    // one hop per step along a path
    for (std::size_t t = 0; t < 30; ++t) CHECK(s.count(t, Compartment::I) == t + 1);
}

TEST_CASE("isolated seed only changes itself") {
    const StaticGraph g(5, {{1, 2, 1.0}, {2, 3, 1.0}});
    const NodeStates s = simulate_network_sir(g, sir(5.0, 0.5, {0}), 40, {2, 0});
    for (std::size_t t = 0; t < s.n_steps(); ++t)
        for (std::size_t v = 1; v < 5; ++v) CHECK(s.at(t, v) == Compartment::S);
    CHECK(s.at(40, 0) == Compartment::R);
}

TEST_CASE("immune nodes never change") {
    const StaticGraph g = random_graph(30, 0.3, {5, 0});
    NetworkSirConfig c = sir(10.0, 0.1, {0});
    c.immune = {3, 4, 7};
    const NodeStates s = simulate_network_sir(g, c, 40, {6, 0});
    for (std::size_t t = 0; t < s.n_steps(); ++t)
        for (NodeId v : c.immune) CHECK(s.at(t, v) == Compartment::V);
}

TEST_CASE("config validation names the field") {
    const StaticGraph g = path(4);
    NetworkSirConfig c = sir(0.1, 0.1, {0});
    c.immune = {0};
    CHECK_THROWS_AS(simulate_network_sir(g, c, 5, {}), Error);
    CHECK_THROWS_AS(simulate_network_sir(g, sir(0.1, 0.1, {}), 5, {}), Error);
    try {
        simulate_network_sir(g, sir(0.1, 0.1, {0, 9}), 5, {});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.field() == "initial_infected[1]");
    }
    CHECK_THROWS_AS(simulate_network_sir(g, sir(-1.0, 0.1, {0}), 5, {}), Error);
    CHECK_THROWS_AS(simulate_network_sir(g, sir(0.1, 0.1, {0}, 0.0), 5, {}), Error);
}

TEST_CASE("identical seeds give identical histories") {
    const StaticGraph g = random_graph(60, 0.1, {8, 0});
    const auto c = sir(0.4, 0.1, {0, 1});
    CHECK(simulate_network_sir(g, c, 60, {9, 4}) == simulate_network_sir(g, c, 60, {9, 4}));
    CHECK_FALSE(simulate_network_sir(g, c, 60, {9, 4}) == simulate_network_sir(g, c, 60, {9, 5}));
}

TEST_CASE("per-step transition probabilities") {
    // two infected neighbors with weights 1 and 2: P(infected after one step) = 1 − exp(−dt·β·3)
    const StaticGraph g(3, {{0, 2, 1.0}, {1, 2, 2.0}});
    const double beta = 0.15, gamma = 0.4, dt = 0.5;
    const int n = 20000;
    int infected = 0, recovered = 0;
    for (int r = 0; r < n; ++r) {
        const NodeStates s = simulate_network_sir(g, sir(beta, gamma, {0, 1}, dt), 1, {77, static_cast<std::uint64_t>(r)});
        infected += s.at(1, 2) == Compartment::I;
        recovered += s.at(1, 0) == Compartment::R;
    }
    const double p_inf = 1.0 - std::exp(-dt * beta * 3.0);
    const double p_rec = 1.0 - std::exp(-gamma * dt);
    CHECK(std::fabs(infected / double(n) - p_inf) < 5 * std::sqrt(p_inf * (1 - p_inf) / n));
    CHECK(std::fabs(recovered / double(n) - p_rec) < 5 * std::sqrt(p_rec * (1 - p_rec) / n));
}

TEST_CASE("ever-infected set is monotone in beta") {
    RandomStream rs(SeedPolicy{31, 0});
    for (int trial = 0; trial < 40; ++trial) {
        const StaticGraph g = random_graph(50, 0.08, {rs.next_u64(), 0});
        const SeedPolicy seed{rs.next_u64(), 0};
        const double b1 = 0.5 * rs.uniform();
        const double b2 = b1 + 0.5 * rs.uniform();
        const auto low = ever_infected(simulate_network_sir(g, sir(b1, 0.2, {0}), 60, seed));
        const auto high = ever_infected(simulate_network_sir(g, sir(b2, 0.2, {0}), 60, seed));
        CHECK(std::includes(high.begin(), high.end(), low.begin(), low.end()));
    }
}

TEST_CASE("attribution points at an infectious neighbor") {
    const StaticGraph g = random_graph(80, 0.08, {12, 0});
    NetworkSirEngine engine(g, sir(0.5, 0.2, {0, 1, 2}), {13, 0});
    std::vector<std::vector<Compartment>> history{engine.states()};
    for (int t = 0; t < 60; ++t) {
        engine.step();
        history.push_back(engine.states());
    }
    int checked = 0;
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        const auto step = engine.infection_step(v);
        const auto src = engine.infection_source(v);
        if (!step || *step == 0) {
            CHECK_FALSE(src.has_value());
            continue;
        }
        REQUIRE(src.has_value());
        CHECK(history[*step - 1][*src] == Compartment::I);
        CHECK(history[*step - 1][v] == Compartment::S);
        CHECK(history[*step][v] == Compartment::I);
        const auto nb = g.neighbors(v);
        CHECK(std::any_of(nb.begin(), nb.end(), [&](const Neighbor& x) { return x.node == *src; }));
        ++checked;
    }
    CHECK(checked > 10);
}

TEST_CASE("vaccinated node is never infected") {
    const StaticGraph g = random_graph(30, 0.3, {14, 0});
    NetworkSirEngine engine(g, sir(1e6, 0.0, {0}), {15, 0});
    const NodeId target = g.neighbors(0)[0].node;
    engine.vaccinate(target);
    for (int t = 0; t < 100; ++t) {
        engine.step();
        REQUIRE(engine.states()[target] == Compartment::V);
    }
    CHECK_FALSE(engine.infection_step(target).has_value());
}

TEST_CASE("interventions are idempotent") {
    const StaticGraph g = random_graph(40, 0.15, {16, 0});
    NetworkSirEngine once(g, sir(0.6, 0.1, {0}), {17, 0});
    NetworkSirEngine twice(g, sir(0.6, 0.1, {0}), {17, 0});
    once.vaccinate(5);
    twice.vaccinate(5);
    twice.vaccinate(5);
    once.quarantine(0);
    twice.quarantine(0);
    twice.quarantine(0);
    for (int t = 0; t < 30; ++t) {
        CHECK(once.step() == twice.step());
        if (t == 3) twice.vaccinate(5);
        CHECK(once.states() == twice.states());
    }
}

TEST_CASE("quarantining the only infected node ends the outbreak") {
    const StaticGraph g = random_graph(30, 0.3, {18, 0});
    NetworkSirEngine engine(g, sir(5.0, 0.0, {0}), {19, 0});
    engine.quarantine(0);
    engine.step();
    CHECK(engine.finished());
    CHECK(engine.states()[0] == Compartment::Q);
    for (int t = 0; t < 20; ++t) engine.step();
    CHECK(engine.count(Compartment::I) == 0);
    CHECK(engine.count(Compartment::S) == 29);
}

TEST_CASE("quarantined node transmits nothing afterwards") {
    const StaticGraph g = random_graph(60, 0.1, {20, 0});
    NetworkSirEngine engine(g, sir(0.8, 0.05, {0, 1}), {21, 0});
    for (int t = 0; t < 3; ++t) engine.step();
    engine.quarantine(0);
    const std::uint64_t from = engine.current_step() + 1;
    for (int t = 0; t < 50; ++t) engine.step();
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        if (engine.infection_step(v) && *engine.infection_step(v) >= from) CHECK(engine.infection_source(v) != 0u);
    }
}

TEST_CASE("parallel mean curve equals the serial reference") {
    const StaticGraph g = random_graph(100, 0.05, {22, 0});
    const auto c = sir(0.3, 0.1, {0, 1, 2});
    const auto parallel = mean_infected_curve(g, c, 80, {23, 0}, 64);
    const auto serial = reference::mean_infected_curve(g, c, 80, {23, 0}, 64);
    CHECK(parallel == serial);
}

TEST_CASE("dynamic graph simulation") {
    std::vector<StaticGraph> snaps;
    for (int t = 0; t < 30; ++t) snaps.push_back(random_graph(25, 0.15, {24, static_cast<std::uint64_t>(t)}));
    const DynamicGraph dg(snaps);
    const auto c = sir(0.7, 0.1, {0});
    const DynamicSirResult a = simulate_dynamic_network_sir(dg, c, {25, 0});
    CHECK(a.states == simulate_dynamic_network_sir(dg, c, {25, 0}).states);
    CHECK(a.states.n_steps() == 30);
    for (std::size_t t = 1; t < 30; ++t) {
        for (NodeId v : a.new_infections[t]) {
            CHECK(a.states.at(t - 1, v) == Compartment::S);
            CHECK(a.states.at(t, v) == Compartment::I);
            const NodeId src = static_cast<NodeId>(a.infection_source[v]);
            CHECK(a.states.at(t - 1, src) == Compartment::I);
            const auto nb = dg.at(t - 1).neighbors(v);
            CHECK(std::any_of(nb.begin(), nb.end(), [&](const Neighbor& x) { return x.node == src; }));
        }
    }
}

}  // TEST_SUITE
