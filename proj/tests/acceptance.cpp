// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "epikit/detect.hpp"
#include "epikit/forecast.hpp"
#include "epikit/mechanistic.hpp"
#include "epikit/network_sir.hpp"
#include "epikit/service.hpp"
#include "epikit/simulate.hpp"
#include "epikit/transforms.hpp"
#include "reference/oracles.hpp"

using namespace epikit;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(4);
    s << x;
    return s.str();
}

// ----------------------------------------------------------------- checks

Outcome conservation() {
    const double n = 1000.0;
    double worst = 0.0;
    const std::vector<CompartmentTrajectory> runs{
        simulate_sir({0.5, 0.1, 0.0, n}, 990, 10, 0, 1000.0, 0.1),
        simulate_sis({0.5, 0.1, 0.0, n}, 990, 10, 1000.0, 0.1),
        simulate_seir({0.5, 0.1, 0.2, n}, 980, 10, 10, 0, 1000.0, 0.1),
    };
    for (const auto& tr : runs) {
        if (tr.size() < 10001) return {false, "fewer than 10000 steps"};
        for (std::size_t k = 0; k < tr.size(); ++k) worst = std::max(worst, std::fabs(tr.total(k) - n) / n);
    }
    return {worst <= 1e-9, "max relative drift " + fmt(worst) + " over 3 models x 10000 steps"};
}

Outcome final_size() {
    double worst = 0.0;
    for (double r0 : {1.5, 2.0, 3.0}) {
        const auto tr = simulate_sir({r0 * 0.1, 0.1, 0.0, 1000.0}, 999, 1, 0, 3000.0, 0.1);
        const double r_inf = tr.series(Compartment::R).back() + tr.series(Compartment::I).back();
        const double oracle = reference::final_size(r0, 1000.0);
        worst = std::max(worst, std::fabs(r_inf - oracle) / oracle);
    }
    return {worst <= 0.005, "max relative gap " + fmt(worst) + " for R0 in {1.5, 2, 3}"};
}

Outcome rk4_order() {
    const CompartmentParams p{0.5, 0.1, 0.0, 1000.0};
    auto gap = [&](double dt) {
        const auto a = simulate_sir(p, 990, 10, 0, 80, dt);
        const auto b = simulate_sir(p, 990, 10, 0, 80, dt / 2);
        const auto& ia = a.series(Compartment::I);
        const auto& ib = b.series(Compartment::I);
        double m = 0.0;
        for (std::size_t k = 0; k < ia.size(); ++k) m = std::max(m, std::fabs(ia[k] - ib[2 * k]));
        return m;
    };
    std::vector<double> err;
    for (int h = 0; h < 4; ++h) err.push_back(gap(0.4 / std::pow(2.0, h)));
    bool ok = true;
    std::string ratios;
    for (std::size_t k = 0; k + 1 < err.size(); ++k) {
        const double r = err[k] / err[k + 1];
        ok = ok && std::fabs(r - 16.0) <= 4.0;
        ratios += (ratios.empty() ? "" : ", ") + fmt(r);
    }
    return {ok, "error ratios per halving " + ratios};
}

Outcome mean_field() {
    const std::size_t n = 500;
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) edges.push_back({u, v, 1.0});
    const StaticGraph g(n, std::move(edges));
    const double beta_total = 0.4, gamma = 0.1, dt = 0.1;
    const std::size_t steps = 1200, i0 = 10;
    NetworkSirConfig cfg;
    cfg.beta = beta_total / static_cast<double>(n);
    cfg.gamma = gamma;
    cfg.dt = dt;
    for (NodeId v = 0; v < i0; ++v) cfg.initial_infected.push_back(v);
    const auto t0 = std::chrono::steady_clock::now();
    const auto mean = mean_infected_curve(g, cfg, steps, {2024, 0}, 200);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto ode = simulate_sir({beta_total, gamma, 0.0, static_cast<double>(n)}, static_cast<double>(n - i0),
                                  static_cast<double>(i0), 0, static_cast<double>(steps) * dt, dt);
    const auto& ode_i = ode.series(Compartment::I);
    double sup = 0.0;
    for (std::size_t t = 0; t <= steps; ++t) sup = std::max(sup, std::fabs(mean[t] - ode_i[t]) / static_cast<double>(n));
    return {sup <= 0.05 && secs < 60.0, "sup-norm gap " + fmt(sup) + " of N, 200 replicates in " + fmt(secs) + "s"};
}

Outcome ar_recovery() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RandomStream rs(SeedPolicy{seed, 0});
        std::vector<double> x(2000);
        double prev = 0.0;
        for (int burn = 0; burn < 100; ++burn) prev = 0.8 * prev + 0.1 * rs.normal();
        for (double& v : x) v = prev = 0.8 * prev + 0.1 * rs.normal();
        worst = std::max(worst, std::fabs(fit_ar(x, 1, 0).coefficients[0] - 0.8));
    }
    return {worst <= 0.05, "max |phi - 0.8| = " + fmt(worst) + " over 20 seeds"};
}

Outcome decomposition() {
    std::vector<double> x(120);
    for (std::size_t t = 0; t < x.size(); ++t)
        x[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 12.0) + 0.3 * static_cast<double>(t);
    const Decomposition d = seasonal_decompose(x, 12);
    double ss = 0.0;
    std::size_t m = 0;
    for (std::size_t t = 0; t < x.size(); ++t)
        if (d.defined[t]) {
            ss += d.residual[t] * d.residual[t];
            ++m;
        }
    const double rms = std::sqrt(ss / static_cast<double>(m));
    return {m > 0 && rms <= 1e-9, "interior residual RMS " + fmt(rms) + " over " + std::to_string(m) + " points"};
}

Outcome parseval() {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        RandomStream rs(SeedPolicy{s, 77});
        const std::size_t t = 2 + rs.below(300), nodes = 1 + rs.below(5), f = 1 + rs.below(3);
        PanelBuilder b(t, nodes, f);
        for (std::size_t i = 0; i < t; ++i)
            for (std::size_t v = 0; v < nodes; ++v)
                for (std::size_t k = 0; k < f; ++k) b(i, v, k) = rs.normal() * 5.0 + 1.0;
        const FeaturePanel p = std::move(b).build();
        const FeaturePanel spec = to_frequency(p);
        for (std::size_t v = 0; v < nodes; ++v)
            for (std::size_t k = 0; k < f; ++k) {
                double energy = 0.0;
                for (double x : p.series(v, k)) energy += x * x;
                const double freq = spectrum_energy(spec.series(v, k), t) / static_cast<double>(t);
                worst = std::max(worst, std::fabs(freq - energy) / energy);
            }
    }
    return {worst <= 1e-6, "max relative energy gap " + fmt(worst) + " over 100 panels"};
}

Outcome detection() {
    RandomStream rs(SeedPolicy{31, 0});
    std::size_t rumor_bad = 0, jordan_bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rs.below(8);
        const Snapshot s = [&] {
            Snapshot out{random_tree(n, rs), {}, std::nullopt};
            for (NodeId v = 0; v < n; ++v) out.infected.push_back(v);
            return out;
        }();
        const auto sc = rumor_centrality(s);
        const auto bf = reference::rumor_bruteforce(s);
        for (NodeId v = 0; v < n; ++v)
            if (std::fabs(sc.probs[v] - bf.probs[v]) > 1e-12 * std::max(1e-300, bf.probs[v])) {
                ++rumor_bad;
                break;
            }
    }
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rs.below(12);
        const StaticGraph tree = random_tree(n, rs);
        std::vector<Edge> edges = tree.edges();
        const double extra = 0.3 * rs.uniform();
        for (NodeId u = 0; u < n; ++u)
            for (NodeId v = u + 1; v < n; ++v) {
                const auto nb = tree.neighbors(u);
                const bool present = std::any_of(nb.begin(), nb.end(), [&](const Neighbor& x) { return x.node == v; });
                if (!present && rs.uniform() < extra) edges.push_back({u, v, 1.0});
            }
        Snapshot s{StaticGraph(n, edges), {}, std::nullopt};
        for (NodeId v = 0; v < n; ++v) s.infected.push_back(v);
        if (jordan_center(s).probs != reference::jordan_center(s).probs) ++jordan_bad;
    }
    const auto cases = synthetic_tree_cases(200, 15, 10, {7, 0});
    const double top1 = evaluate_detector(rumor_centrality, cases).top1;
    return {rumor_bad == 0 && jordan_bad == 0 && top1 > 0.1,
            std::to_string(rumor_bad) + "/200 rumor mismatches, " + std::to_string(jordan_bad) +
                "/500 jordan mismatches, rumor top-1 " + fmt(top1) + " vs baseline 0.1"};
}

Outcome windowing() {
    RandomStream rs(SeedPolicy{5, 0});
    std::size_t bad = 0, total = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t lookback = 1 + rs.below(30), horizon = 1 + rs.below(12);
        const std::size_t t = lookback + horizon + rs.below(80);
        std::vector<double> idx(t * 2);
        for (std::size_t i = 0; i < t; ++i) idx[2 * i] = idx[2 * i + 1] = static_cast<double>(i);
        const auto w = make_windows(FeaturePanel(t, 2, 1, idx), {lookback, horizon});
        if (w.size() != t - lookback - horizon + 1 || w.size() != window_count(t, {lookback, horizon})) ++bad;
        for (const auto& win : w) {
            ++total;
            double max_in = -1.0, min_out = 1e300;
            for (double x : win.input.values()) max_in = std::max(max_in, x);
            for (double x : win.target.values()) min_out = std::min(min_out, x);
            if (!(max_in < min_out)) ++bad;
        }
    }
    return {bad == 0, std::to_string(bad) + " violations over 500 shapes, " + std::to_string(total) + " windows"};
}

std::string run_cli(const std::string& args, int& status) {
    const std::string cmd = std::string(EPIKIT_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed");
    std::string out;
    char buf[4096];
    std::size_t k;
    while ((k = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, k);
    status = WEXITSTATUS(::pclose(pipe));
    return out;
}

Outcome cli_determinism() {
    const std::vector<std::string> commands{
        "forecast --data toy --model ar --lookback 12 --horizon 3 --seed 7",
        "simulate network-sir --nodes 100 --steps 60 --beta 0.3 --seed 7",
        "detect --cases synthetic-trees --detector rumor --seed 7",
    };
    std::string detail;
    bool ok = true;
    for (const auto& c : commands) {
        int s1 = -1, s2 = -1;
        const std::string a = run_cli(c, s1), b = run_cli(c, s2);
        const bool same = s1 == 0 && s2 == 0 && !a.empty() && a == b;
        ok = ok && same;
        detail += (detail.empty() ? "" : ", ") + c.substr(0, c.find(' ')) + (same ? " identical" : " differs");
    }
    return {ok, detail};
}

namespace beast = boost::beast;
namespace http = beast::http;

Json call(std::uint16_t port, http::verb verb, const std::string& target, const Json& body = nullptr) {
    boost::asio::io_context ioc;
    beast::tcp_stream stream(ioc);
    stream.connect(boost::asio::ip::tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), port));
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "127.0.0.1");
    if (!body.is_null()) req.body() = body.dump();
    req.prepare_payload();
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(stream, buf, res);
    if (res.result_int() >= 300) throw std::runtime_error(target + " returned " + std::to_string(res.result_int()));
    return Json::parse(res.body());
}

Json history(std::uint16_t port, const std::string& id, std::size_t n) {
    Json out = Json::array();
    for (std::size_t v = 0; v < n; ++v) out.push_back(call(port, http::verb::get, "/sessions/" + id + "/nodes/" + std::to_string(v) + "/history"));
    return out;
}

Outcome replay() {
    const std::size_t n = 80;
    Json log, original;
    {
        service::HttpServer server(std::make_shared<service::SessionManager>(), "127.0.0.1", 0);
        const auto port = server.start();
        const Json created = call(port, http::verb::post, "/sessions",
                                  Json{{"random_graph", {{"n", n}, {"edge_prob", 0.06}, {"seed", 3}}},
                                       {"config", {{"beta", 0.5}, {"gamma", 0.1}, {"initial_infected", {0, 1}}}},
                                       {"seed", {{"master_seed", 99}, {"stream_id", 1}}}});
        const std::string id = created["id"];
        call(port, http::verb::post, "/sessions/" + id + "/step", Json{{"k", 4}});
        call(port, http::verb::post, "/sessions/" + id + "/intervene", Json{{"action", "vaccinate"}, {"node", 10}});
        call(port, http::verb::post, "/sessions/" + id + "/intervene", Json{{"action", "quarantine"}, {"node", 0}});
        call(port, http::verb::post, "/sessions/" + id + "/step", Json{{"k", 6}});
        call(port, http::verb::post, "/sessions/" + id + "/intervene", Json{{"action", "quarantine"}, {"node", 25}});
        call(port, http::verb::post, "/sessions/" + id + "/step", Json{{"k", 30}});
        log = call(port, http::verb::get, "/sessions/" + id + "/log");
        original = history(port, id, n);
        server.stop();
    }
    service::HttpServer fresh(std::make_shared<service::SessionManager>(), "127.0.0.1", 0);
    const auto port = fresh.start();
    const std::string id = call(port, http::verb::post, "/sessions/replay", log)["id"];
    const Json replayed = history(port, id, n);
    fresh.stop();
    const std::size_t steps = original[0]["timeline"].size();
    return {replayed == original, std::to_string(n) + " node histories over " + std::to_string(steps) + " states " +
                                      (replayed == original ? "identical" : "differ")};
}

}  // namespace

int main() {
    report("conservation", conservation);
    report("final-size", final_size);
    report("rk4-order", rk4_order);
    report("mean-field", mean_field);
    report("ar-recovery", ar_recovery);
    report("decomposition", decomposition);
    report("parseval", parseval);
    report("source-detection", detection);
    report("windowing", windowing);
    report("cli-determinism", cli_determinism);
    report("replay-determinism", replay);
    return failures == 0 ? 0 : 1;
}
