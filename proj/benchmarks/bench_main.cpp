#include "invabc/layers.hpp"
#include "invabc/rng.hpp"

#include <benchmark/benchmark.h>

using namespace invabc;
using namespace invabc::nn;

namespace {

Tensor random_tensor(std::size_t n, std::size_t h, std::size_t w, std::size_t c,
                     std::uint64_t seed) {
    Tensor t(n, h, w, c);
    Rng rng(seed);
    for (auto& v : t.vec()) v = rng.uniform(-1.0, 1.0);
    return t;
}

void bm_conv_forward(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const auto cin = static_cast<std::size_t>(state.range(1));
    const auto cout = static_cast<std::size_t>(state.range(2));
    Conv2d conv(4, 4, cin, cout, 2);
    Rng rng(1);
    for (auto& w : conv.w) w = rng.uniform(-0.1, 0.1);
    Tensor x = random_tensor(16, side, side, cin, 2);
    for (auto _ : state) {
        Tensor y = conv.forward(x, true);
        benchmark::DoNotOptimize(y.data());
    }
}

void bm_conv_backward(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const auto cin = static_cast<std::size_t>(state.range(1));
    const auto cout = static_cast<std::size_t>(state.range(2));
    Conv2d conv(4, 4, cin, cout, 2);
    Rng rng(1);
    for (auto& w : conv.w) w = rng.uniform(-0.1, 0.1);
    Tensor x = random_tensor(16, side, side, cin, 2);
    Tensor y = conv.forward(x, true);
    Tensor dy = random_tensor(y.n(), y.h(), y.w(), y.c(), 3);
    for (auto _ : state) {
        Tensor dx = conv.backward(dy);
        benchmark::DoNotOptimize(dx.data());
    }
}

void bm_conv_transpose_forward(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const auto cin = static_cast<std::size_t>(state.range(1));
    const auto cout = static_cast<std::size_t>(state.range(2));
    ConvTranspose2d convt(4, 4, cin, cout, 2);
    Rng rng(1);
    for (auto& w : convt.w) w = rng.uniform(-0.1, 0.1);
    Tensor x = random_tensor(16, side, side, cin, 2);
    for (auto _ : state) {
        Tensor y = convt.forward(x, true);
        benchmark::DoNotOptimize(y.data());
    }
}

BENCHMARK(bm_conv_forward)->Args({32, 3, 32})->Args({16, 32, 64})->Args({8, 64, 128});
BENCHMARK(bm_conv_backward)->Args({32, 3, 32})->Args({16, 32, 64});
BENCHMARK(bm_conv_transpose_forward)->Args({8, 128, 64})->Args({16, 64, 32});

} // namespace

BENCHMARK_MAIN();
