#include <benchmark/benchmark.h>

#include <vector>

#include "hazesep/compand.hpp"
#include "hazesep/dehazer.hpp"
#include "hazesep/dsm.hpp"
#include "hazesep/imaging.hpp"
#include "hazesep/metrics.hpp"
#include "hazesep/patchwork.hpp"
#include "hazesep/rng.hpp"
#include "hazesep/score_net.hpp"

using namespace hazesep;

namespace {

RFGrid unit_frame(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    SeededRng rng(seed);
    RFGrid g(rows, cols);
    for (double& v : g.values()) v = rng.uniform(-1.0, 1.0);
    return g;
}

void BM_CompandRoundTrip(benchmark::State& state) {
    const RFGrid x = unit_frame(128, 64, 1);
    const compand::CompandParams p;
    for (auto _ : state) {
        benchmark::DoNotOptimize(compand::decode(compand::encode(x, p).grid, p).grid);
    }
}
BENCHMARK(BM_CompandRoundTrip);

void BM_DcGradients(benchmark::State& state) {
    const dehaze::DehazeConfig cfg;
    const RFGrid y = unit_frame(128, 64, 2), x = unit_frame(128, 64, 3), h = unit_frame(128, 64, 4);
    for (auto _ : state) benchmark::DoNotOptimize(dehaze::dc_gradients(y, x, h, cfg));
}
BENCHMARK(BM_DcGradients);

NetArch bench_arch(Precision p) {
    NetArch a;
    a.precision = p;
    return a;
}

void BM_NetEvaluate(benchmark::State& state) {
    const auto p = state.range(0) == 64 ? Precision::float64 : Precision::float32;
    const sde::SdeSchedule s;
    const TrainableScoreNet net(bench_arch(p), s, 1);
    const RFGrid x = unit_frame(128, 64, 5);
    for (auto _ : state) benchmark::DoNotOptimize(net.evaluate(x, 0.4));
    state.SetLabel(to_string(p));
}
BENCHMARK(BM_NetEvaluate)->Arg(64)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_DsmLossAndGrad(benchmark::State& state) {
    const auto p = state.range(0) == 64 ? Precision::float64 : Precision::float32;
    const sde::SdeSchedule s;
    const TrainableScoreNet net(bench_arch(p), s, 1);
    SeededRng rng(6);
    std::vector<RFGrid> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(unit_frame(128, 64, 10 + i));
    for (auto _ : state) benchmark::DoNotOptimize(dsm::dsm_loss_and_grad(net, batch, s, rng));
    state.SetLabel(to_string(p));
}
BENCHMARK(BM_DsmLossAndGrad)->Arg(64)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Interleave3x3(benchmark::State& state) {
    const patch::PatchLayout layout;
    const auto plan = patch::plan(256, 160, layout);
    const auto base = patch::extract_all(unit_frame(256, 160, 7), plan);
    for (auto _ : state) {
        auto patches = base;
        patch::interleave(patches, plan);
        benchmark::DoNotOptimize(patches);
    }
}
BENCHMARK(BM_Interleave3x3);

void BM_BMode(benchmark::State& state) {
    const RFGrid x = unit_frame(256, 160, 8);
    for (auto _ : state) benchmark::DoNotOptimize(imaging::bmode(x, 60.0));
}
BENCHMARK(BM_BMode);

void BM_Gcnr(benchmark::State& state) {
    SeededRng rng(9);
    std::vector<double> a(20000), b(20000);
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = rng.normal() + 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(metrics::gcnr(a, b, 256));
}
BENCHMARK(BM_Gcnr);

}  // namespace

BENCHMARK_MAIN();
