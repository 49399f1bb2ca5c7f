#include <benchmark/benchmark.h>

#include "openrpf/open_analysis.hpp"
#include "openrpf/scenarios.hpp"

namespace {

using namespace openrpf;

OperatorFamily family_for(const std::string& name, std::size_t cells) {
  ExperimentConfig cfg = load_scenario(name);
  cfg.discretization.cells = cells;
  return OperatorFamily(cfg.system, cfg.potential, cfg.discretization);
}

void BM_AssembleDoubling(benchmark::State& state) {
  const ExperimentConfig cfg = load_scenario("doubling_hole_q1");
  Discretization d = cfg.discretization;
  d.cells = static_cast<std::size_t>(state.range(0));
  const Grid g = build_grid(cfg.system, FiberId{0}, d);
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble(cfg.system, cfg.potential, g, g, FiberId{0}, Variant::Open));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AssembleDoubling)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

void BM_AssembleGauss(benchmark::State& state) {
  const ExperimentConfig cfg = load_scenario("gauss_closed");
  Discretization d = cfg.discretization;
  d.cells = static_cast<std::size_t>(state.range(0));
  const Grid g = build_grid(cfg.system, FiberId{0}, d);
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble(cfg.system, cfg.potential, g, g, FiberId{0}, Variant::Closed));
  }
}
BENCHMARK(BM_AssembleGauss)->RangeMultiplier(4)->Range(256, 4096);

void BM_SolveCycle(benchmark::State& state) {
  const OperatorFamily fam = family_for("rand2_mixed", static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_fiber_system(fam, Variant::Open));
}
BENCHMARK(BM_SolveCycle)->RangeMultiplier(4)->Range(256, 4096);

void BM_SolveWindow(benchmark::State& state) {
  const OperatorFamily fam = family_for("orbit_window_random", 1024);
  for (auto _ : state) benchmark::DoNotOptimize(solve_fiber_system(fam, Variant::Closed));
}
BENCHMARK(BM_SolveWindow);

void BM_EscapeRate(benchmark::State& state) {
  const OperatorFamily fam = family_for("doubling_hole_q1", 4096);
  const SpectralSolution closed = solve_fiber_system(fam, Variant::Closed);
  const SpectralSolution open = solve_fiber_system(fam, Variant::Open);
  const PressureReport p = expected_pressure(fam, closed, open);
  for (auto _ : state) benchmark::DoNotOptimize(escape_rate(fam, closed, p, FiberId{0}, 40, 0));
}
BENCHMARK(BM_EscapeRate);

}  // namespace

BENCHMARK_MAIN();
