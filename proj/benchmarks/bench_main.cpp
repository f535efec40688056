#include <benchmark/benchmark.h>

#include "fockfk/flow.hpp"
#include "fockfk/linalg.hpp"
#include "fockfk/oracle.hpp"
#include "fockfk/rng.hpp"
#include "fockfk/stoch.hpp"

using namespace fockfk;

namespace {

FockContext bench_context(int cap) {
  RVec om(2);
  om << 1.0, 2.0;
  return build_context(2, om, cap, 1);
}

CoefficientVector bench_coupling() {
  CoefficientVector c;
  c.mode_count = 2;
  c.nu = 1;
  c.spin = scalar_spin();
  c.G = [](const RVec& x) {
    Mat g(2, 1);
    g(0, 0) = 0.25 * std::exp(-0.5 * x[0] * x[0]);
    g(1, 0) = 0.175 * std::exp(-0.25 * x[0] * x[0]);
    return g;
  };
  c.q = [](const RVec& x) {
    Vec q(2);
    q[0] = -0.25 * x[0] * std::exp(-0.5 * x[0] * x[0]);
    q[1] = -0.0875 * x[0] * std::exp(-0.25 * x[0] * x[0]);
    return q;
  };
  return c;
}

void bm_build_context(benchmark::State& state) {
  RVec om(2);
  om << 1.0, 2.0;
  for (auto _ : state)
    benchmark::DoNotOptimize(build_context(2, om, static_cast<int>(state.range(0)), 1));
}
BENCHMARK(bm_build_context)->Arg(3)->Arg(6)->Arg(10);

void bm_field_assembly(benchmark::State& state) {
  const FockContext ctx = bench_context(static_cast<int>(state.range(0)));
  Rng rng(1);
  Vec f(2);
  f << Cplx(rng.gaussian(), rng.gaussian()), Cplx(rng.gaussian(), rng.gaussian());
  for (auto _ : state) benchmark::DoNotOptimize(field_fock(ctx, f));
}
BENCHMARK(bm_field_assembly)->Arg(3)->Arg(6);

void bm_expm_hermitian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(2);
  Mat h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = Cplx(rng.gaussian(), rng.gaussian());
  h = 0.5 * (h + Mat(h.adjoint())).eval();
  for (auto _ : state) benchmark::DoNotOptimize(expm_hermitian(h, 0.5));
}
BENCHMARK(bm_expm_hermitian)->Arg(10)->Arg(40)->Arg(160);

void bm_expm_general(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m(i, j) = 0.05 * Cplx(rng.gaussian(), rng.gaussian());
  for (auto _ : state) benchmark::DoNotOptimize(expm_general(m));
}
BENCHMARK(bm_expm_general)->Arg(10)->Arg(40);

void bm_sample_paths(benchmark::State& state) {
  RVec x(1);
  x[0] = 0.0;
  TimeGrid grid{0.5, 200};
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_paths(PathBundle::Kind::brownian, x,
                                          std::nullopt, grid,
                                          static_cast<int>(state.range(0)), 7));
}
BENCHMARK(bm_sample_paths)->Arg(100)->Arg(1000);

void bm_flow_step_vector(benchmark::State& state) {
  const FockContext ctx = bench_context(3);
  const CoefficientVector c = bench_coupling();
  PotentialSpec v;
  v.V = [](const RVec& x) { return 0.3 * std::cos(x[0]); };
  TimeGrid grid{0.5, 200};
  FlowEngine engine(ctx, c, v, grid);
  Vec state_vec = Vec::Zero(ctx.dim());
  state_vec[0] = 1.0;
  RVec x(1), dx(1);
  x[0] = 0.1;
  dx[0] = 0.05;
  for (auto _ : state) {
    engine.apply_step(state_vec, x, dx);
    benchmark::DoNotOptimize(state_vec);
  }
}
BENCHMARK(bm_flow_step_vector);

void bm_flow_step_matrix(benchmark::State& state) {
  const FockContext ctx = bench_context(3);
  const CoefficientVector c = bench_coupling();
  PotentialSpec v;
  v.V = [](const RVec& x) { return 0.3 * std::cos(x[0]); };
  TimeGrid grid{0.5, 200};
  FlowEngine engine(ctx, c, v, grid);
  Mat w = Mat::Identity(ctx.dim(), ctx.dim());
  RVec x(1), dx(1);
  x[0] = 0.1;
  dx[0] = 0.05;
  for (auto _ : state) {
    engine.apply_step(w, x, dx);
    benchmark::DoNotOptimize(w);
  }
}
BENCHMARK(bm_flow_step_matrix);

}  // namespace

BENCHMARK_MAIN();
