#include <benchmark/benchmark.h>

#include "vagcn/geometry.hpp"
#include "vagcn/ops.hpp"
#include "vagcn/rng.hpp"

namespace {

template <class T>
vagcn::Tensor<T> random_tensor(vagcn::Shape shape, uint64_t seed) {
    vagcn::Rng rng(seed);
    vagcn::Tensor<T> t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
    return t;
}

void BM_matmul_f32(benchmark::State& state) {
    const size_t m = static_cast<size_t>(state.range(0));
    auto a = random_tensor<float>({m, m}, 1);
    auto b = random_tensor<float>({m, m}, 2);
    for (auto _ : state) {
        auto c = vagcn::matmul(a, b);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * m * m * m);
}

void BM_shared_mlp_shape_f32(benchmark::State& state) {
    // Edge tensor through a weight matrix: [B*N, K, C] x [C, C2].
    auto x = random_tensor<float>({4096, 8, 96}, 3);
    auto w = random_tensor<float>({96, 256}, 4);
    for (auto _ : state) {
        auto y = vagcn::matmul(x, w);
        benchmark::DoNotOptimize(y.data());
    }
}

}  // namespace

BENCHMARK(BM_matmul_f32)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(BM_shared_mlp_shape_f32);
