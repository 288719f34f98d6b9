#include <benchmark/benchmark.h>

#include "sfstab/control.hpp"
#include "sfstab/examples.hpp"
#include "sfstab/roa.hpp"
#include "sfstab/sim.hpp"

using namespace sfstab;

static void BM_IntegratePlanar(benchmark::State& state) {
  const double eps = 1.0 / static_cast<double>(state.range(0));
  const NormalFormSystem sys = examples::build_planar_example(eps);
  const OdeSystem ode = closed_loop_slow(sys, make_thm2_controller(2, {{1.0}, {1.0}, 3.0}));
  const IntegratorConfig cfg = IntegratorConfig::for_epsilon(eps, 10.0);
  std::size_t steps = 0;
  for (auto _ : state) {
    const Trajectory t = integrate(ode, Vector{-2.0, 2.0}, cfg);
    steps += t.accepted_steps;
    benchmark::DoNotOptimize(t.final_state().data());
  }
  state.counters["steps"] = benchmark::Counter(static_cast<double>(steps), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_IntegratePlanar)->Arg(20)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_IntegrateTunnelDiode(benchmark::State& state) {
  const examples::TunnelDiode td({1.0, 1.0, 0.01});
  const auto [u, v] = examples::example1_controllers({});
  const OdeSystem open = td.closed_loop({});
  const OdeSystem closed = td.closed_loop(u);
  const IntegratorConfig cfg = IntegratorConfig::for_epsilon(0.01, 30.0);
  for (auto _ : state) {
    const Trajectory t = integrate_switched(open, closed, Vector{-10.0, 10.0, 10.0}, 10.0, cfg);
    benchmark::DoNotOptimize(t.final_state().data());
  }
}
BENCHMARK(BM_IntegrateTunnelDiode)->Unit(benchmark::kMillisecond);

static void BM_SweepPlanar(benchmark::State& state) {
  const NormalFormSystem sys = examples::build_planar_example(0.01);
  ControllerSpec spec;
  spec.kind = ControllerSpec::Kind::Thm2Plus3;
  spec.thm2 = {{1.0}, {1.0}, 3.0};
  spec.thm3 = {{50.0}, {-2.0}};
  const auto n = static_cast<std::size_t>(state.range(0));
  const GridSpec grid{{{-3.0, 3.0, n}}, {-3.0, 3.0, n}};
  const IntegratorConfig cfg = IntegratorConfig::for_epsilon(0.01, 10.0);
  for (auto _ : state) {
    const RoAReport r = sweep(sys, spec, grid, cfg, {}, static_cast<std::size_t>(state.range(1)));
    benchmark::DoNotOptimize(r.converged_count);
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n * n));
}
BENCHMARK(BM_SweepPlanar)->Args({11, 1})->Args({11, 4})->UseRealTime()->Unit(benchmark::kMillisecond);

static void BM_ClosedLoopFamilyRhs(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const std::size_t n = static_cast<std::size_t>(k - 1);
  const NormalFormSystem sys{k, 0.0, [](std::span<const double> x, double z, double) {
                               Vector f(x.size());
                               for (std::size_t i = 0; i < x.size(); ++i) f[i] = 1.0 + x[i] * z;
                               return f;
                             }};
  const Theorem2Params p{Vector(n, 1.0), Vector(n, 2.0), 3.0};
  const FamilyChartState c{0.1, Vector(n, 0.2), 0.3};
  for (auto _ : state) benchmark::DoNotOptimize(closed_loop_family_rhs(c, sys, p));
}
BENCHMARK(BM_ClosedLoopFamilyRhs)->DenseRange(2, 6, 2);

BENCHMARK_MAIN();
