#include <benchmark/benchmark.h>

#include "flcleaner/cvae.hpp"
#include "flcleaner/defense.hpp"
#include "flcleaner/geomed.hpp"
#include "flcleaner/nn.hpp"
#include "flcleaner/rng.hpp"

using namespace flcleaner;

namespace {

Dataset bench_dataset(int count, int dim, int classes, std::uint64_t seed) {
    Dataset ds;
    ds.shape = {1, 1, dim};
    ds.num_classes = classes;
    ds.pixels.resize(static_cast<std::size_t>(count) * dim);
    ds.labels.resize(static_cast<std::size_t>(count));
    Prng rng(seed);
    for (auto& p : ds.pixels) p = rng.uniform01();
    for (auto& l : ds.labels) l = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(classes)));
    return ds;
}

void BM_forward_mlp(benchmark::State& state) {
    const ModelSpec spec = mlp_spec(784, 128, 10, 1);
    const WeightVector w = init_model(spec);
    const Dataset ds = bench_dataset(64, 784, 10, 2);
    const DataView view = full_view(ds);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(w, spec, ds, view.indices));
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_forward_mlp);

void BM_train_epoch_mlp(benchmark::State& state) {
    const ModelSpec spec = mlp_spec(784, 128, 10, 1);
    const WeightVector w = init_model(spec);
    const Dataset ds = bench_dataset(256, 784, 10, 3);
    const DataView view = full_view(ds);
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_local(w, spec, view, 1, 0.05, 32));
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_train_epoch_mlp);

void BM_geometric_median(benchmark::State& state) {
    const auto n_points = static_cast<std::size_t>(state.range(0));
    const auto dim = static_cast<std::size_t>(state.range(1));
    Prng rng(4);
    std::vector<std::vector<double>> pts(n_points, std::vector<double>(dim));
    for (auto& p : pts)
        for (auto& v : p) v = rng.gaussian();
    for (auto _ : state) {
        benchmark::DoNotOptimize(geometric_median(pts));
    }
}
BENCHMARK(BM_geometric_median)->Args({10, 138})->Args({250, 138})->Args({10, 101770});

void BM_cvae_reconstruction(benchmark::State& state) {
    const CvaeState s = init_cvae(138, 16, 10, 5);
    Prng rng(6);
    std::vector<double> nam(138);
    for (auto& v : nam) v = rng.uniform01();
    for (auto _ : state) {
        benchmark::DoNotOptimize(reconstruction_error(s, nam, 3));
    }
}
BENCHMARK(BM_cvae_reconstruction);

void BM_trust_propagate(benchmark::State& state) {
    Prng rng(7);
    std::vector<ClientScore> scores;
    for (int i = 0; i < 50; ++i) scores.push_back({i, rng.uniform01()});
    for (auto _ : state) {
        benchmark::DoNotOptimize(trust_propagate(scores, 0.3));
    }
}
BENCHMARK(BM_trust_propagate);

} // namespace

BENCHMARK_MAIN();
