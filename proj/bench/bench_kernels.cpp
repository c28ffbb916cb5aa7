// Parallel kernels against their serial references.
// Arg 0 on the parallel benchmarks = all threads, otherwise that many threads.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "epikit/forecast.hpp"
#include "epikit/io.hpp"
#include "epikit/network_sir.hpp"
#include "epikit/simulate.hpp"
#include "epikit/transforms.hpp"
#include "reference/oracles.hpp"

using namespace epikit;

namespace {

FeaturePanel big_panel() {
    RandomStream rs(SeedPolicy{1, 0});
    PanelBuilder b(512, 400, 4);
    for (std::size_t t = 0; t < 512; ++t)
        for (std::size_t v = 0; v < 400; ++v)
            for (std::size_t f = 0; f < 4; ++f) b(t, v, f) = rs.normal();
    return std::move(b).build();
}

const FeaturePanel& panel() {
    static const FeaturePanel p = big_panel();
    return p;
}

const StaticGraph& contact_graph() {
    static const StaticGraph g = random_graph(2000, 0.005, {2, 0});
    return g;
}

NetworkSirConfig sir_config() {
    NetworkSirConfig c;
    c.beta = 0.3;
    c.gamma = 0.1;
    c.initial_infected = {0, 1, 2};
    return c;
}

struct Threads {
    explicit Threads(std::int64_t n) : before(omp_get_max_threads()) {
        if (n > 0) omp_set_num_threads(static_cast<int>(n));
    }
    ~Threads() { omp_set_num_threads(before); }
    int before;
};

void BM_NormalizeSerial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(reference::normalize_features(panel(), 400, NormalizationMode::ZScore));
}

void BM_NormalizeParallel(benchmark::State& st) {
    Threads t(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(normalize_features(panel(), 400));
}

void BM_MeanCurveSerial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(reference::mean_infected_curve(contact_graph(), sir_config(), 100, {3, 0}, 32));
}

void BM_MeanCurveParallel(benchmark::State& st) {
    Threads t(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(mean_infected_curve(contact_graph(), sir_config(), 100, {3, 0}, 32));
}

void BM_FrequencyParallel(benchmark::State& st) {
    Threads t(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(to_frequency(panel()));
}

void BM_ArFitParallel(benchmark::State& st) {
    Threads t(st.range(0));
    const FeaturePanel train = panel().slice(0, 400);
    for (auto _ : st) {
        auto m = make_forecaster("ar");
        m->fit(train, {12, 3});
        benchmark::DoNotOptimize(m.get());
    }
}

}  // namespace

BENCHMARK(BM_NormalizeSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NormalizeParallel)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MeanCurveSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MeanCurveParallel)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FrequencyParallel)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ArFitParallel)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
