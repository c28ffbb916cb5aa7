#include "epikit/transforms.hpp"

#include <fftw3.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>

#include "epikit/error.hpp"

namespace epikit {

// ------------------------------------------------------------ normalization

FeaturePanel normalize_features(const FeaturePanel& panel, std::size_t train_steps, NormalizationMode mode) {
    const std::size_t T = panel.n_steps();
    require(T > 0 && panel.n_nodes() > 0 && panel.n_features() > 0, "empty panel", "panel");
    require(train_steps >= 1 && train_steps <= T, "training segment must be nonempty and inside the panel",
            "train_steps");
    const std::size_t channels = panel.n_nodes() * panel.n_features();
    std::vector<double> out(panel.values().size());
    const auto& in = panel.values();

#pragma omp parallel for schedule(static)
    for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(channels); ++ci) {
        const auto c = static_cast<std::size_t>(ci);
        double shift = 0.0;
        double scale = 1.0;
        if (mode == NormalizationMode::ZScore) {
            double mean = 0.0;
            for (std::size_t t = 0; t < train_steps; ++t) mean += in[t * channels + c];
            mean /= static_cast<double>(train_steps);
            double var = 0.0;
            for (std::size_t t = 0; t < train_steps; ++t) {
                const double d = in[t * channels + c] - mean;
                var += d * d;
            }
            const double sd = std::sqrt(var / static_cast<double>(train_steps));
            shift = mean;
            if (sd >= 1e-12) scale = sd;
        } else {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (std::size_t t = 0; t < train_steps; ++t) {
                lo = std::min(lo, in[t * channels + c]);
                hi = std::max(hi, in[t * channels + c]);
            }
            shift = lo;
            if (hi - lo >= 1e-12) scale = hi - lo;
        }
        for (std::size_t t = 0; t < T; ++t) out[t * channels + c] = (in[t * channels + c] - shift) / scale;
    }
    return FeaturePanel(T, panel.n_nodes(), panel.n_features(), std::move(out));
}

Eigen::MatrixXd normalize_adjacency(const StaticGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.n_nodes());
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    for (const Edge& e : g.edges()) {
        require(e.w >= 0.0, "weights must be >= 0", "edges");
        a(e.u, e.v) += e.w;
        if (!g.directed() && e.u != e.v) a(e.v, e.u) += e.w;
    }
    const Eigen::VectorXd deg = a.rowwise().sum();
    // d_i * d_j commutes, so undirected input gives an exactly symmetric result
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (a(i, j) != 0.0) a(i, j) /= std::sqrt(deg(i) * deg(j));
    return a;
}

StaticGraph normalize_adjacency_graph(const StaticGraph& g) {
    const Eigen::MatrixXd m = normalize_adjacency(g);
    std::vector<Edge> edges;
    for (NodeId v = 0; v < g.n_nodes(); ++v) edges.push_back({v, v, m(v, v)});
    for (const Edge& e : g.edges())
        if (e.u != e.v) edges.push_back({e.u, e.v, m(e.u, e.v)});
    return StaticGraph::with_self_loops(g.n_nodes(), std::move(edges), g.directed());
}

// ------------------------------------------------------------ frequency domain

namespace {

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

// Planning is not thread-safe in FFTW; execution on distinct arrays is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

double spectrum_energy(std::span<const double> magnitudes, std::size_t signal_length) {
    double energy = 0.0;
    for (std::size_t k = 0; k < magnitudes.size(); ++k) {
        const bool unpaired = k == 0 || (signal_length % 2 == 0 && k == signal_length / 2);
        energy += (unpaired ? 1.0 : 2.0) * magnitudes[k] * magnitudes[k];
    }
    return energy;
}

FeaturePanel to_frequency(const FeaturePanel& panel) {
    const std::size_t T = panel.n_steps();
    require(T >= 2, "frequency transform needs at least 2 steps", "panel.n_steps");
    const std::size_t bins = T / 2 + 1;
    const std::size_t channels = panel.n_nodes() * panel.n_features();
    const auto& in = panel.values();
    std::vector<double> out(bins * channels);

    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        std::unique_ptr<double, FftwFree> x(fftw_alloc_real(T));
        std::unique_ptr<fftw_complex, FftwFree> spec(fftw_alloc_complex(bins));
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(T), x.get(), spec.get(), FFTW_ESTIMATE);
    }

    std::atomic<bool> parseval_ok{true};
#pragma omp parallel
    {
        std::unique_ptr<double, FftwFree> x(fftw_alloc_real(T));
        std::unique_ptr<fftw_complex, FftwFree> spec(fftw_alloc_complex(bins));
#pragma omp for schedule(static)
        for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(channels); ++ci) {
            const auto c = static_cast<std::size_t>(ci);
            for (std::size_t t = 0; t < T; ++t) x.get()[t] = in[t * channels + c];
            fftw_execute_dft_r2c(plan, x.get(), spec.get());
            for (std::size_t k = 0; k < bins; ++k)
                out[k * channels + c] = std::hypot(spec.get()[k][0], spec.get()[k][1]);
#ifndef NDEBUG
            double time_energy = 0.0;
            for (std::size_t t = 0; t < T; ++t) time_energy += x.get()[t] * x.get()[t];
            std::vector<double> mags(bins);
            for (std::size_t k = 0; k < bins; ++k) mags[k] = out[k * channels + c];
            const double freq_energy = spectrum_energy(mags, T) / static_cast<double>(T);
            if (std::abs(freq_energy - time_energy) > 1e-8 * std::max(1.0, time_energy)) parseval_ok = false;
#endif
        }
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    if (!parseval_ok) fail(ErrorKind::Runtime, "Parseval check failed");
    return FeaturePanel(bins, panel.n_nodes(), panel.n_features(), std::move(out));
}

// -------------------------------------------------------------- embeddings

FeaturePanel add_time_embedding(const FeaturePanel& panel, std::size_t dims, double period_base) {
    require(dims >= 2 && dims % 2 == 0, "time embedding dims must be even and >= 2", "dims");
    require(std::isfinite(period_base) && period_base > 0.0, "period_base must be > 0", "period_base");
    const std::size_t F = panel.n_features();
    PanelBuilder out(panel.n_steps(), panel.n_nodes(), F + dims);
    std::vector<double> inv_freq(dims / 2);
    for (std::size_t k = 0; k < dims / 2; ++k)
        inv_freq[k] = std::pow(period_base, static_cast<double>(2 * k) / static_cast<double>(dims));
    for (std::size_t t = 0; t < panel.n_steps(); ++t) {
        for (std::size_t v = 0; v < panel.n_nodes(); ++v) {
            for (std::size_t f = 0; f < F; ++f) out(t, v, f) = panel.at(t, v, f);
            for (std::size_t k = 0; k < dims / 2; ++k) {
                const double angle = static_cast<double>(t) / inv_freq[k];
                out(t, v, F + 2 * k) = std::sin(angle);
                out(t, v, F + 2 * k + 1) = std::cos(angle);
            }
        }
    }
    return std::move(out).build();
}

// ------------------------------------------------------------ decomposition

Decomposition seasonal_decompose(std::span<const double> series, std::size_t period) {
    require(period >= 2, "period must be >= 2", "period");
    const std::size_t n = series.size();
    require(n >= 2 * period, "series must span at least two periods", "series");
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();

    Decomposition d;
    d.period = period;
    d.trend.assign(n, nan);
    d.residual.assign(n, nan);
    d.defined.assign(n, false);

    // Centered moving average; even periods use the 2×period window whose
    // end points carry half weight.
    const std::size_t half = period / 2;
    const bool even = period % 2 == 0;
    for (std::size_t i = half; i + half < n; ++i) {
        double s = 0.0;
        if (even) {
            s = 0.5 * (series[i - half] + series[i + half]);
            for (std::size_t j = i - half + 1; j < i + half; ++j) s += series[j];
        } else {
            for (std::size_t j = i - half; j <= i + half; ++j) s += series[j];
        }
        d.trend[i] = s / static_cast<double>(period);
        d.defined[i] = true;
    }

    std::vector<double> phase_sum(period, 0.0);
    std::vector<std::size_t> phase_count(period, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!d.defined[i]) continue;
        phase_sum[i % period] += series[i] - d.trend[i];
        ++phase_count[i % period];
    }
    std::vector<double> pattern(period);
    double mean = 0.0;
    for (std::size_t k = 0; k < period; ++k) {
        pattern[k] = phase_sum[k] / static_cast<double>(phase_count[k]);
        mean += pattern[k];
    }
    mean /= static_cast<double>(period);
    for (double& p : pattern) p -= mean;

    d.seasonal.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.seasonal[i] = pattern[i % period];
        if (d.defined[i]) d.residual[i] = series[i] - d.trend[i] - d.seasonal[i];
    }
    return d;
}

// ----------------------------------------------------------------- pipeline

FeatureTransform normalize_features_transform(NormalizationMode mode) {
    return {mode == NormalizationMode::ZScore ? "normalize" : "normalize_minmax",
            [mode](const FeaturePanel& p, std::size_t train) { return normalize_features(p, train, mode); }};
}

FeatureTransform to_frequency_transform() {
    return {"frequency", [](const FeaturePanel& p, std::size_t) { return to_frequency(p); }};
}

FeatureTransform time_embedding_transform(std::size_t dims, double period_base) {
    return {"time_embedding",
            [dims, period_base](const FeaturePanel& p, std::size_t) { return add_time_embedding(p, dims, period_base); }};
}

GraphTransform normalize_adjacency_transform() {
    return {"normalize_adj", [](const StaticGraph& g) { return normalize_adjacency_graph(g); }};
}

EpiDataset apply_pipeline(const TransformPipeline& pipeline, const EpiDataset& ds) {
    auto rethrow = [](const std::string& group, std::size_t i, const std::string& name, const std::exception& e) {
        fail(ErrorKind::InvalidArgument,
             "transform " + group + "[" + std::to_string(i) + "] (" + name + ") failed: " + e.what(),
             group + "[" + std::to_string(i) + "]");
    };

    FeaturePanel panel = ds.panel();
    for (std::size_t i = 0; i < pipeline.feature_transforms.size(); ++i) {
        const auto& tr = pipeline.feature_transforms[i];
        try {
            panel = tr.apply(panel, split_lengths(panel.n_steps(), ds.split()).train);
        } catch (const std::exception& e) {
            rethrow("features", i, tr.name, e);
        }
    }
    EpiDataset out = ds.with_panel(std::move(panel));

    std::optional<StaticGraph> static_graph = out.static_graph();
    std::optional<DynamicGraph> dynamic_graph = out.dynamic_graph();
    for (std::size_t i = 0; i < pipeline.graph_transforms.size(); ++i) {
        const auto& tr = pipeline.graph_transforms[i];
        try {
            if (static_graph) static_graph = tr.apply(*static_graph);
            if (dynamic_graph) {
                std::vector<StaticGraph> snaps;
                snaps.reserve(dynamic_graph->n_steps());
                for (const StaticGraph& g : dynamic_graph->snapshots()) snaps.push_back(tr.apply(g));
                dynamic_graph = DynamicGraph(std::move(snaps));
            }
        } catch (const std::exception& e) {
            rethrow("graph", i, tr.name, e);
        }
    }
    if (pipeline.graph_transforms.empty()) return out;
    return out.with_graphs(std::move(static_graph), std::move(dynamic_graph));
}

}  // namespace epikit
