// Serial reference vs OpenMP kernels. Arg 0 selects the variant (0 serial, 1 parallel).

#include <benchmark/benchmark.h>

#include <numeric>

#include "cotc/kernels.hpp"
#include "cotc/random.hpp"
#include "cotc/selector.hpp"

using namespace cotc;

namespace {

std::vector<std::vector<double>> random_rows(std::size_t n, std::size_t d) {
    Rng rng(99);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (auto& r : rows) {
        for (auto& x : r) x = uniform01(rng) * 2 - 1;
    }
    return rows;
}

Execution exec_of(const benchmark::State& state) { return state.range(0) ? Execution::Parallel : Execution::Serial; }

void BM_NeighborLists(benchmark::State& state) {
    const PointMatrix m(random_rows(static_cast<std::size_t>(state.range(1)), 64));
    for (auto _ : state) benchmark::DoNotOptimize(neighbor_lists(m, 0.3, Metric::Cosine, exec_of(state)));
    state.SetComplexityN(state.range(1));
}

void BM_MinDistanceStep(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(1));
    const PointMatrix m(random_rows(n, 64));
    std::vector<double> md(n, 1e300);
    std::vector<char> selected(n, 0);
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    std::size_t pivot = 0;
    for (auto _ : state) {
        update_min_distance(m, pivot, md, Metric::Cosine, exec_of(state));
        pivot = argmax_unselected(md, selected, rank, exec_of(state));
        if (pivot == n) pivot = 0;
    }
}

void BM_Fps(benchmark::State& state) {
    const auto rows = random_rows(static_cast<std::size_t>(state.range(1)), 64);
    std::vector<ReasoningProfile> ps;
    for (std::size_t i = 0; i < rows.size(); ++i) ps.push_back({std::to_string(i), rows[i]});
    for (auto _ : state) {
        benchmark::DoNotOptimize(farthest_point_sampling(ps, 100, 0, FpsOptions{Metric::Cosine, false, exec_of(state)}));
    }
}

}  // namespace

BENCHMARK(BM_NeighborLists)->ArgsProduct({{0, 1}, {500, 2000}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MinDistanceStep)->ArgsProduct({{0, 1}, {10000, 100000}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Fps)->ArgsProduct({{0, 1}, {5000, 20000}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
