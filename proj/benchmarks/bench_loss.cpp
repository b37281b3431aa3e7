#include "delayscape/geodesic.hpp"
#include "delayscape/loss.hpp"
#include "delayscape/mesh.hpp"

#include "workloads.hpp"

#include <benchmark/benchmark.h>

using namespace delayscape;

namespace {

void BM_LossAndGradient(benchmark::State& state) {
    const auto w = workloads::loss_workload(static_cast<int>(state.range(0)), 40);
    for (auto _ : state) {
        auto report = loss::evaluate(w.mesh, w.context, w.z, true);
        benchmark::DoNotOptimize(report.total);
        benchmark::DoNotOptimize(report.gradient.data());
    }
    state.counters["vertices"] = static_cast<double>(w.mesh.vertex_count());
    state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_LossAndGradient)->Arg(20)->Arg(35)->Arg(50)->Unit(benchmark::kMillisecond)->Complexity(benchmark::oN);

void BM_LossOnly(benchmark::State& state) {
    const auto w = workloads::loss_workload(static_cast<int>(state.range(0)), 40);
    for (auto _ : state) benchmark::DoNotOptimize(loss::evaluate(w.mesh, w.context, w.z, false).total);
}
BENCHMARK(BM_LossOnly)->Arg(20)->Arg(35)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_SurfaceEvaluation(benchmark::State& state) {
    const auto w = workloads::loss_workload(static_cast<int>(state.range(0)), 0);
    for (auto _ : state) benchmark::DoNotOptimize(mesh::evaluate_surface(w.mesh, w.z).curvatures.gaussian.data());
}
BENCHMARK(BM_SurfaceEvaluation)->Arg(20)->Arg(35)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Geodesic(benchmark::State& state) {
    const auto w = workloads::loss_workload(30, 0);
    const int s = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(geodesic::surface_geodesic(w.mesh, w.z, {0.1, 0.2}, {0.9, 0.7}, s).length);
    }
}
BENCHMARK(BM_Geodesic)->Arg(0)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
