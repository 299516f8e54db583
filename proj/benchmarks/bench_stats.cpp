#include "invabc/abc.hpp"
#include "invabc/image.hpp"
#include "invabc/lhd.hpp"
#include "invabc/lssvr.hpp"
#include "invabc/rng.hpp"

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

using namespace invabc;

namespace {

std::vector<std::vector<double>> random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (auto& row : rows)
        for (auto& v : row) v = rng.uniform();
    return rows;
}

void bm_lhd_sample(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::vector<double> lo(6, 0.0), hi(6, 1.0);
    std::uint64_t seed = 1;
    for (auto _ : state) {
        auto rows = lhd_sample(n, lo, hi, seed++);
        benchmark::DoNotOptimize(rows.data());
    }
}

void bm_lssvr_fit(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto anchors = random_rows(n, 6, 11);
    const auto targets = random_rows(n, 8, 12);
    const std::vector<double> lo(6, 0.0), hi(6, 1.0);
    const lssvr::KernelSpec kernel{lssvr::KernelKind::Rbf, 1.0};
    for (auto _ : state) {
        auto model = lssvr::fit_multi(anchors, targets, 100.0, kernel, lo, hi);
        benchmark::DoNotOptimize(&model);
    }
}

void bm_lssvr_predict(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto anchors = random_rows(n, 6, 21);
    const auto targets = random_rows(n, 8, 22);
    const std::vector<double> lo(6, 0.0), hi(6, 1.0);
    const lssvr::LvLssvrModel model =
        lssvr::fit_multi(anchors, targets, 100.0, {lssvr::KernelKind::Rbf, 1.0}, lo, hi);
    const auto queries = random_rows(256, 6, 23);
    std::size_t i = 0;
    for (auto _ : state) {
        auto z = model.predict(queries[i++ & 255]);
        benchmark::DoNotOptimize(z.data());
    }
}

void bm_ssim(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    Rng rng(31);
    img::RgbImage x = img::RgbImage::filled(side, side, 0, 0, 0);
    img::RgbImage y = x;
    for (auto& p : x.pixels) p = static_cast<std::uint8_t>(rng.index(256));
    for (auto& p : y.pixels) p = static_cast<std::uint8_t>(rng.index(256));
    for (auto _ : state) {
        double s = img::ssim(x, y);
        benchmark::DoNotOptimize(s);
    }
}

void bm_npmc_generation(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<abc::PriorDim> dims(6);
    const abc::Prior prior(dims);
    const abc::Forward forward = [](const std::vector<double>& th) {
        std::vector<double> z(8, 0.0);
        for (std::size_t j = 0; j < 8; ++j)
            for (std::size_t i = 0; i < th.size(); ++i)
                z[j] += (j % 2 == 0 ? 1.0 : -0.5) * th[i] * th[(i + j) % th.size()];
        return z;
    };
    const std::vector<double> zo = forward(std::vector<double>(6, 0.5));
    abc::ParticlePool pool = abc::rejection_sample(prior, forward, zo, 2.0, n, 5);
    std::uint64_t seed = 6;
    for (auto _ : state) {
        auto next = abc::pmc_iterate(pool, prior, forward, zo, 1.5, n, seed++);
        benchmark::DoNotOptimize(&next);
    }
}

BENCHMARK(bm_lhd_sample)->Arg(100)->Arg(1000);
BENCHMARK(bm_lssvr_fit)->Arg(100)->Arg(250)->Arg(500);
BENCHMARK(bm_lssvr_predict)->Arg(100)->Arg(250)->Arg(500);
BENCHMARK(bm_ssim)->Arg(64)->Arg(256);
BENCHMARK(bm_npmc_generation)->Arg(200)->Arg(500);

} // namespace
