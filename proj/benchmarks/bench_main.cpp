#include <benchmark/benchmark.h>

#include <random>

#include "jsreg/energy.hpp"
#include "jsreg/geodesic.hpp"
#include "jsreg/nnet.hpp"
#include "jsreg/phantom.hpp"

using namespace jsreg;

namespace {

TensorMap random_tensor(int c, int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    TensorMap t(c, h, w);
    for (auto& v : t.data) {
        v = d(rng);
    }
    return t;
}

void BM_Conv3x3(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto x = random_tensor(8, n, n, 1);
    const auto k = random_tensor(8 * 8, 3, 3, 2).data;
    const std::vector<double> b(8, 0.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv_forward(x, k, b, 8, 3, 1));
    }
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Conv3x3)->Arg(32)->Arg(64)->Arg(128);

void BM_Warp(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto ph = make_phantom(1, PhantomSpec{.size = n});
    for (auto _ : state) {
        benchmark::DoNotOptimize(warp_bilinear(ph.r, ph.u_true));
    }
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Warp)->Arg(64)->Arg(320);

void BM_EnergyAndGradients(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto ph = make_phantom(2, PhantomSpec{.size = n});
    const Image2D theta(n, n, 0.5);
    const Image2D d = geodesic_distance(ph.t, ph.markers, GeodesicConfig{});
    EnergyParams p;
    p.a1 = 0.8;
    p.a2 = 0.3;
    p.c1 = 0.8;
    p.c2 = 0.3;
    for (auto _ : state) {
        benchmark::DoNotOptimize(total_energy(theta, ph.u_true, ph.t, ph.r, d, p));
        benchmark::DoNotOptimize(grad_theta(theta, ph.u_true, ph.t, ph.r, d, p));
        benchmark::DoNotOptimize(grad_u(theta, ph.u_true, ph.t, ph.r, d, p));
    }
}
BENCHMARK(BM_EnergyAndGradients)->Arg(64)->Arg(128);

void BM_Geodesic(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto ph = make_phantom(3, PhantomSpec{.size = n});
    for (auto _ : state) {
        benchmark::DoNotOptimize(geodesic_distance(ph.t, ph.markers, GeodesicConfig{}));
    }
}
BENCHMARK(BM_Geodesic)->Arg(64)->Arg(320);

} // namespace
BENCHMARK_MAIN();
