// Microbenchmarks for the hot paths: exact and sampled Shapley division,
// coverage-market clearing, and logistic-regression training.

#include <memory>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "shapmarket/market.hpp"
#include "shapmarket/model.hpp"
#include "shapmarket/replication.hpp"
#include "shapmarket/shapley.hpp"

using namespace shapmarket;

namespace {

CharacteristicFunction table_game(int m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = std::size_t(1) << m;
    auto table = std::make_shared<std::vector<double>>(n, 0.0);
    for (std::size_t s = 1; s < n; ++s)
        (*table)[s] = double(rng() >> 11) * 0x1.0p-53;
    return CharacteristicFunction(m, [table](Coalition s) { return (*table)[s]; });
}

void BM_ShapleyExact(benchmark::State& state) {
    const int m = int(state.range(0));
    const CharacteristicFunction v = table_game(m, 42);
    v.precompute_all();  // measure the division, not the table fill
    for (auto _ : state) {
        benchmark::DoNotOptimize(shapley_exact(v));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ShapleyExact)->DenseRange(4, 16, 2)->Complexity(benchmark::oNLogN);

void BM_ShapleySampled(benchmark::State& state) {
    const int perms = int(state.range(0));
    const CharacteristicFunction v = table_game(12, 43);
    v.precompute_all();
    for (auto _ : state) {
        benchmark::DoNotOptimize(shapley_sampled(v, perms, 7));
    }
}
BENCHMARK(BM_ShapleySampled)->Arg(500)->Arg(2000)->Arg(8000);

void BM_ClearCoverageMarket(benchmark::State& state) {
    const int parties = int(state.range(0));
    const RandomMarket rm = random_coverage_market(99, parties, MarketKind::Single);
    MarketConfig config;
    for (auto _ : state) {
        benchmark::DoNotOptimize(clear_single(rm.parties, rm.validation, rm.gain, config));
    }
}
BENCHMARK(BM_ClearCoverageMarket)->DenseRange(4, 12, 2);

void BM_LogisticTrain(benchmark::State& state) {
    const int per_cluster = int(state.range(0));
    const LabeledDataset data = synth_clusters(
        std::array{ClusterSpec{{-2.0, 0.0}, 0.5, 0, per_cluster},
                   ClusterSpec{{2.0, 0.0}, 0.5, 1, per_cluster}},
        1234);
    ModelSpec spec;
    spec.num_classes = 2;
    spec.epochs = 50;
    for (auto _ : state) {
        benchmark::DoNotOptimize(train(spec, data));
    }
}
BENCHMARK(BM_LogisticTrain)->Arg(50)->Arg(200)->Arg(800);

}  // namespace

BENCHMARK_MAIN();
