// Serial vs OpenMP vs reference Liouvillian application.

#include <benchmark/benchmark.h>

#include <random>

#include "optomech/kernels.hpp"
#include "optomech/model.hpp"

namespace {

using namespace optomech;

SystemParams bench_params() {
  SystemParams p;
  p.coupling = Coupling::Quadratic;
  p.g = {-0.2};
  p.gamma = {0.001};
  p.delta_c = -0.02;
  p.eta = 0.2;
  p.omega_m = 0.01;
  return p;
}

CMatrix random_rho(Index d) {
  std::mt19937 rng(5);
  std::normal_distribution<double> n;
  CMatrix a(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) a(i, j) = cplx(n(rng), n(rng));
  CMatrix rho = a * a.adjoint();
  return rho / rho.trace();
}

void run(benchmark::State& state, int mode) {
  const int db = static_cast<int>(state.range(0));
  const HilbertSpace s({6, db});
  const auto gen = build_generator(bench_params(), s);
  const CMatrix rho = random_rho(s.total());
  CMatrix out(s.total(), s.total()), scratch(s.total(), s.total());
  for (auto _ : state) {
    if (mode == 2) {
      out = liouvillian_apply_reference(gen, rho);
    } else {
      gen.apply(rho, out, scratch, mode == 0 ? kernels::Exec::Serial : kernels::Exec::Parallel);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["dim"] = static_cast<double>(s.total());
  state.counters["threads"] = mode == 1 ? kernels::thread_count() : 1;
}

void BM_Serial(benchmark::State& s) { run(s, 0); }
void BM_Parallel(benchmark::State& s) { run(s, 1); }
void BM_Reference(benchmark::State& s) { run(s, 2); }

BENCHMARK(BM_Serial)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Parallel)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Reference)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
