// OpenMP sweeps against their serial reference implementations.
#include <benchmark/benchmark.h>

#include "nvgyro/sensing_metrics.hpp"

using namespace nvgyro;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  return v;
}

struct Grid {
  LambdaParams base = LambdaParams::defaults();
  std::vector<double> p;
  std::vector<double> omega;
  SweepSettings settings;

  explicit Grid(int n) : p(linspace(-80.0, -40.0, n)), omega(linspace(kTwoPi * 100.0, kTwoPi * 8e3, n)) {}
};

template <auto Sweep>
void power_drive(benchmark::State& state) {
  const Grid g(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Sweep(g.base, g.p, g.omega, g.settings));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <auto Sweep>
void cooperativity(benchmark::State& state) {
  const Grid g(8);
  const std::vector<double> c = linspace(5.0, 80.0, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Sweep(g.base, c, g.p, g.omega, g.settings));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 64);
}

}  // namespace

BENCHMARK(power_drive<sweep_power_drive>)->Name("sweep_power_drive/omp")->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(power_drive<sweep_power_drive_serial>)->Name("sweep_power_drive/serial")->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(cooperativity<sweep_cooperativity>)->Name("sweep_cooperativity/omp")->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(cooperativity<sweep_cooperativity_serial>)->Name("sweep_cooperativity/serial")->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
