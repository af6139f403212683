#include <benchmark/benchmark.h>

#include "koopgen/basis.hpp"
#include "koopgen/dynamics.hpp"
#include "koopgen/generator.hpp"
#include "koopgen/kernels.hpp"
#include "koopgen/nystrom.hpp"

using namespace koopgen;

namespace {

TrajectoryDataset lorenz(Index n) {
  const auto sys = FlowSystem::lorenz63();
  return generate_dataset(sys, random_initial_state(sys, 1), n, 3.0, 100, auto_substeps(3.0));
}

}  // namespace

static void BM_Simulate(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(lorenz(state.range(0)));
}
BENCHMARK(BM_Simulate)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_TuneAndFit(benchmark::State& state) {
  const auto data = lorenz(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(VariableBandwidthKernel::fit(data.embedded));
}
BENCHMARK(BM_TuneAndFit)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_KernelMatrix(benchmark::State& state) {
  const auto kernel = VariableBandwidthKernel::fit(lorenz(state.range(0)).embedded);
  for (auto _ : state) benchmark::DoNotOptimize(kernel.matrix());
}
BENCHMARK(BM_KernelMatrix)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_Basis(benchmark::State& state) {
  const Mat k = VariableBandwidthKernel::fit(lorenz(state.range(0)).embedded).matrix();
  for (auto _ : state) benchmark::DoNotOptimize(compute_basis(normalize_bistochastic(k), 50));
}
BENCHMARK(BM_Basis)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_AssembleGenerator(benchmark::State& state) {
  const auto sys = FlowSystem::lorenz63();
  const auto data = lorenz(state.range(0));
  const auto kernel = VariableBandwidthKernel::fit(data.embedded);
  const auto basis = compute_basis(normalize_bistochastic(kernel.matrix()), 50);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_generator(data, sys, basis, kernel, 50));
}
BENCHMARK(BM_AssembleGenerator)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_SolveGevp(benchmark::State& state) {
  const Index l = state.range(0);
  const Mat r = Mat::Random(l, l);
  const auto p = assemble_forms(r - r.transpose() + 0.05 * r, Vec::Ones(l), 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(solve_gevp(p.A, p.B));
}
BENCHMARK(BM_SolveGevp)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_NystromBatch(benchmark::State& state) {
  const auto data = lorenz(2000);
  const auto kernel = VariableBandwidthKernel::fit(data.embedded);
  const auto basis = compute_basis(normalize_bistochastic(kernel.matrix()), 50);
  const Evaluator ev(kernel, basis);
  const auto test = lorenz(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ev.basis_values(test.embedded));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NystromBatch)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
