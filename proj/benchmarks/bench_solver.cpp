#include <benchmark/benchmark.h>

#include <cmath>

#include "swed/editor.hpp"
#include "swed/linalg.hpp"
#include "swed/rng.hpp"
#include "swed/toymodel.hpp"

namespace {

swed::Matrix random_spd(swed::Rng& rng, std::size_t n) {
    swed::Matrix a = swed::gram(rng.gaussian_matrix(n, n));
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
    return a;
}

void BM_Cholesky(benchmark::State& state) {
    swed::Rng rng(1);
    const auto n = static_cast<std::size_t>(state.range(0));
    const swed::Matrix a = random_spd(rng, n);
    for (auto _ : state) {
        auto f = swed::cholesky(a);
        benchmark::DoNotOptimize(f.r.data());
    }
}
BENCHMARK(BM_Cholesky)->Arg(128)->Arg(256)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Svd(benchmark::State& state) {
    swed::Rng rng(2);
    const auto rows = static_cast<std::size_t>(state.range(0));
    const auto cols = static_cast<std::size_t>(state.range(1));
    const swed::Matrix a = rng.gaussian_matrix(rows, cols);
    for (auto _ : state) {
        auto s = swed::svd(a);
        benchmark::DoNotOptimize(s.singular_values.data());
    }
}
BENCHMARK(BM_Svd)
    ->Args({128, 64})
    ->Args({256, 128})
    ->Args({512, 256})
    ->Args({1024, 256})
    ->Unit(benchmark::kMillisecond);

void BM_Solve(benchmark::State& state) {
    swed::Rng rng(3);
    const auto d = static_cast<std::size_t>(state.range(0));
    const auto m = static_cast<std::size_t>(state.range(1));
    const auto n = static_cast<std::size_t>(state.range(2));
    const swed::EditProblem p(rng.gaussian_matrix(n, d), rng.gaussian_matrix(n, d),
                              rng.gaussian_matrix(d, m, 1.0 / std::sqrt(double(d))),
                              rng.gaussian_matrix(n, m), 1.0, 1e-3, 32);
    for (auto _ : state) {
        auto sol = swed::solve(p);
        benchmark::DoNotOptimize(sol.delta_w.data());
    }
}
BENCHMARK(BM_Solve)
    ->Args({128, 80, 128})   // default planted instance scale
    ->Args({512, 128, 256})
    ->Args({1024, 256, 512}) // performance envelope
    ->Unit(benchmark::kMillisecond);

void BM_ToyForward(benchmark::State& state) {
    const swed::toy::GeneratedData data =
        swed::toy::generate(swed::toy::SyntheticSpec::defaults());
    for (auto _ : state) {
        auto out = swed::toy::forward(data.model, data.x_high);
        benchmark::DoNotOptimize(out.output.data());
    }
}
BENCHMARK(BM_ToyForward)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
