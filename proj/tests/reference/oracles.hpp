#pragma once

// Independent reference implementations. Deliberately naive: brute force,
// direct sums, serial loops. Tests compare the library against these, and the
// benchmark times the serial references against the parallel kernels.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "epikit/detect.hpp"
#include "epikit/network_sir.hpp"
#include "epikit/transforms.hpp"

namespace epikit::reference {

/// Root of r = N(1 − exp(−R0·r/N)) in (0, N] by bisection.
inline double final_size(double r0, double n) {
    auto f = [&](double r) { return r - n * (1.0 - std::exp(-r0 * r / n)); };
    double lo = 1e-9 * n, hi = n;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// |X_k| for k = 0..⌊T/2⌋ by the O(T²) definition.
inline std::vector<double> dft_magnitudes(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> out(n / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::complex<long double> acc = 0;
        for (std::size_t t = 0; t < n; ++t) {
            const long double angle = -2.0L * 3.14159265358979323846264338327950288L * static_cast<long double>(k * t % n) /
                                      static_cast<long double>(n);
            acc += static_cast<long double>(x[t]) * std::complex<long double>(std::cos(angle), std::sin(angle));
        }
        out[k] = static_cast<double>(std::abs(acc));
    }
    return out;
}

/// Serial per-channel normalization.
inline FeaturePanel normalize_features(const FeaturePanel& panel, std::size_t train_steps, NormalizationMode mode) {
    std::vector<double> values = panel.values();
    for (std::size_t v = 0; v < panel.n_nodes(); ++v) {
        for (std::size_t f = 0; f < panel.n_features(); ++f) {
            double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::size_t t = 0; t < train_steps; ++t) {
                const double x = panel.at(t, v, f);
                sum += x;
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            const double mean = sum / static_cast<double>(train_steps);
            double ss = 0.0;
            for (std::size_t t = 0; t < train_steps; ++t) ss += (panel.at(t, v, f) - mean) * (panel.at(t, v, f) - mean);
            const double sd = std::sqrt(ss / static_cast<double>(train_steps));
            for (std::size_t t = 0; t < panel.n_steps(); ++t) {
                double& x = values[panel.index(t, v, f)];
                if (mode == NormalizationMode::ZScore) x = sd < 1e-12 ? x - mean : (x - mean) / sd;
                else x = hi - lo < 1e-12 ? x - lo : (x - lo) / (hi - lo);
            }
        }
    }
    return FeaturePanel(panel.n_steps(), panel.n_nodes(), panel.n_features(), std::move(values));
}

/// Serial replicate loop over simulate_network_sir.
inline std::vector<double> mean_infected_curve(const StaticGraph& g, const NetworkSirConfig& cfg, std::size_t steps,
                                               const SeedPolicy& seed, std::size_t replicates) {
    std::vector<double> sum(steps + 1, 0.0);
    for (std::size_t r = 0; r < replicates; ++r) {
        const NodeStates states = simulate_network_sir(g, cfg, steps, derive_stream(seed, r));
        for (std::size_t t = 0; t <= steps; ++t) sum[t] += static_cast<double>(states.count(t, Compartment::I));
    }
    for (double& x : sum) x /= static_cast<double>(replicates);
    return sum;
}

/// All-pairs hop distances inside the infected-induced subgraph (Floyd–Warshall).
inline std::vector<std::size_t> induced_eccentricities(const Snapshot& s) {
    const std::vector<NodeId> inf = s.infected_set();
    const std::size_t m = inf.size();
    constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max() / 4;
    std::vector<std::size_t> d(m * m, kInf);
    for (std::size_t i = 0; i < m; ++i) d[i * m + i] = 0;
    for (const Edge& e : s.graph.edges()) {
        auto a = std::lower_bound(inf.begin(), inf.end(), e.u);
        auto b = std::lower_bound(inf.begin(), inf.end(), e.v);
        if (a == inf.end() || *a != e.u || b == inf.end() || *b != e.v) continue;
        const std::size_t i = a - inf.begin(), j = b - inf.begin();
        d[i * m + j] = d[j * m + i] = 1;
    }
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) d[i * m + j] = std::min(d[i * m + j], d[i * m + k] + d[k * m + j]);
    std::vector<std::size_t> ecc(m, 0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) ecc[i] = std::max(ecc[i], d[i * m + j]);
    return ecc;
}

inline SourceScore jordan_center(const Snapshot& s) {
    const std::vector<NodeId> inf = s.infected_set();
    const auto ecc = induced_eccentricities(s);
    const std::size_t best = *std::min_element(ecc.begin(), ecc.end());
    const auto ties = static_cast<double>(std::count(ecc.begin(), ecc.end(), best));
    SourceScore out{std::vector<double>(s.graph.n_nodes(), 0.0)};
    for (std::size_t i = 0; i < inf.size(); ++i)
        if (ecc[i] == best) out.probs[inf[i]] = 1.0 / ties;
    return out;
}

/// Number of orderings of the infected set that start at `root` and in which
/// every later node touches an earlier one (feasible infection orders).
inline double feasible_orderings(const Snapshot& s, NodeId root) {
    const std::vector<NodeId> inf = s.infected_set();
    std::vector<NodeId> rest;
    for (NodeId v : inf)
        if (v != root) rest.push_back(v);
    std::vector<char> adj(s.graph.n_nodes() * s.graph.n_nodes(), 0);
    for (const Edge& e : s.graph.edges()) adj[e.u * s.graph.n_nodes() + e.v] = adj[e.v * s.graph.n_nodes() + e.u] = 1;
    double count = 0.0;
    do {
        std::vector<NodeId> seen{root};
        bool ok = true;
        for (NodeId v : rest) {
            ok = std::any_of(seen.begin(), seen.end(), [&](NodeId u) { return adj[u * s.graph.n_nodes() + v] != 0; });
            if (!ok) break;
            seen.push_back(v);
        }
        if (ok) count += 1.0;
    } while (std::next_permutation(rest.begin(), rest.end()));
    return count;
}

inline SourceScore rumor_bruteforce(const Snapshot& s) {
    SourceScore out{std::vector<double>(s.graph.n_nodes(), 0.0)};
    double total = 0.0;
    for (NodeId v : s.infected_set()) total += out.probs[v] = feasible_orderings(s, v);
    for (double& p : out.probs) p /= total;
    return out;
}

/// Least squares by normal equations and Gaussian elimination with partial
/// pivoting; X is row-major n×k.
inline std::vector<double> least_squares(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
    const std::size_t k = x.front().size();
    std::vector<std::vector<long double>> a(k, std::vector<long double>(k + 1, 0.0L));
    for (std::size_t r = 0; r < x.size(); ++r)
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) a[i][j] += static_cast<long double>(x[r][i]) * x[r][j];
            a[i][k] += static_cast<long double>(x[r][i]) * y[r];
        }
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < k; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        for (std::size_t r = 0; r < k; ++r) {
            if (r == c) continue;
            const long double f = a[r][c] / a[c][c];
            for (std::size_t j = c; j <= k; ++j) a[r][j] -= f * a[c][j];
        }
    }
    std::vector<double> beta(k);
    for (std::size_t i = 0; i < k; ++i) beta[i] = static_cast<double>(a[i][k] / a[i][i]);
    return beta;
}

}  // namespace epikit::reference
