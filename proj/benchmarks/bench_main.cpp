#include <benchmark/benchmark.h>

#include <vector>

#include "transmamba/fft.hpp"
#include "transmamba/losses.hpp"
#include "transmamba/mamba.hpp"
#include "transmamba/network.hpp"
#include "transmamba/ops.hpp"
#include "transmamba/rng.hpp"

using namespace transmamba;

namespace {

Tensor random_image(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed, bool grad = false) {
    Rng rng(seed);
    std::vector<double> v(c * h * w);
    for (auto& x : v) x = rng.uniform(0, 1);
    return Tensor::from({c, h, w}, std::move(v), grad);
}

void BM_Fft1d(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto plan = fft::plan_for(n);
    std::vector<fft::cplx> data(n);
    Rng rng(1);
    for (auto& z : data) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (auto _ : state) {
        plan->execute(data, false);
        benchmark::DoNotOptimize(data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_Fft1d)->Arg(32)->Arg(48)->Arg(64)->Arg(70)->Arg(128)->Arg(97);

void BM_Fft2d(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<fft::cplx> plane(n * n, fft::cplx{0.5, 0.0});
    for (auto _ : state) {
        fft::transform_2d(plane, n, n, false);
        benchmark::DoNotOptimize(plane.data());
    }
}
BENCHMARK(BM_Fft2d)->Arg(32)->Arg(64)->Arg(128);

void BM_SelectiveScan(benchmark::State& state) {
    const auto len = static_cast<std::size_t>(state.range(0));
    ModelState params;
    ParamInitializer init(params, 3);
    const auto p = make_ssm_params(init, "ssm", 16, 8);
    const Tensor x = random_image(1, 16, len, 5);
    const Tensor seq = reshape(x, {16, len});
    for (auto _ : state) benchmark::DoNotOptimize(ssm_scan(seq, p).data().data());
    state.SetItemsProcessed(state.iterations() * static_cast<long>(len));
}
BENCHMARK(BM_SelectiveScan)->Arg(256)->Arg(1024);

void BM_DeskForward(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const ModelConfig cfg = ModelConfig::desk();
    const ModelState s = init_model_state(cfg, 0);
    const Network net(cfg, s);
    const Tensor x = random_image(3, side, side, 9);
    NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(x).data().data());
}
BENCHMARK(BM_DeskForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DeskTrainStep(benchmark::State& state) {
    const ModelConfig cfg = ModelConfig::desk();
    ModelState s = init_model_state(cfg, 0);
    const Network net(cfg, s);
    const Tensor x = random_image(3, 32, 32, 9);
    const Tensor y = random_image(3, 32, 32, 10);
    for (auto _ : state) {
        s.zero_grad();
        total_loss(net.forward(x), y).backward();
    }
}
BENCHMARK(BM_DeskTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
