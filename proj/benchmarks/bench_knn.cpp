#include <benchmark/benchmark.h>

#include "vagcn/data.hpp"
#include "vagcn/knn.hpp"
#include "vagcn/rng.hpp"

namespace {

vagcn::PointSet random_cloud(size_t n, uint64_t seed) {
    vagcn::Rng rng(seed);
    vagcn::PointSet p;
    p.n = n;
    p.xyz.resize(n * 3);
    for (double& v : p.xyz) v = rng.uniform(-1.0, 1.0);
    vagcn::normalize_unit_sphere(p);
    return p;
}

void BM_knn_bruteforce(benchmark::State& state) {
    const size_t n = static_cast<size_t>(state.range(0));
    const size_t k = static_cast<size_t>(state.range(1));
    const auto cloud = random_cloud(n, 42);
    for (auto _ : state) {
        auto g = vagcn::knn_bruteforce(cloud, k, 0.4);
        benchmark::DoNotOptimize(g.indices.data());
    }
}

void BM_knn_grid(benchmark::State& state) {
    const size_t n = static_cast<size_t>(state.range(0));
    const size_t k = static_cast<size_t>(state.range(1));
    const auto cloud = random_cloud(n, 42);
    for (auto _ : state) {
        auto g = vagcn::knn_grid(cloud, k, 0.4);
        benchmark::DoNotOptimize(g.indices.data());
    }
}

void BM_sort_all_neighbors(benchmark::State& state) {
    const size_t n = static_cast<size_t>(state.range(0));
    const auto cloud = random_cloud(n, 42);
    for (auto _ : state) {
        auto t = vagcn::sort_all_neighbors(cloud);
        benchmark::DoNotOptimize(t.idx.data());
    }
}

}  // namespace

BENCHMARK(BM_knn_bruteforce)->Args({256, 8})->Args({1024, 8})->Args({1024, 20})->Args({4096, 20});
BENCHMARK(BM_knn_grid)->Args({256, 8})->Args({1024, 8})->Args({1024, 20})->Args({4096, 20});
BENCHMARK(BM_sort_all_neighbors)->Arg(256)->Arg(1024);
