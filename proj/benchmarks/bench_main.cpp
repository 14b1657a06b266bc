#include "ncps/analysis.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

namespace {

using namespace ncps;

// Per-step problem with particles packed well inside the repulsion range.
ImplicitProblem clustered_problem(int d, double c) {
    const Philox4x32 gen(0x62656e6368ULL);
    Vector a(d);
    for (int i = 0; i < d; ++i) a[i] = -1.0 + 2.0 * uniform_pair(gen, 0, static_cast<std::uint64_t>(i))[0];
    return ImplicitProblem::uniform(std::move(a), c);
}

void BM_SolveNewton(benchmark::State& state) {
    const auto p = clustered_problem(static_cast<int>(state.range(0)), 1e-2);
    SolverOptions o;
    o.method = SolverMethod::newton;
    for (auto _ : state) benchmark::DoNotOptimize(solve(p, o).xi.data());
}
BENCHMARK(BM_SolveNewton)->Arg(2)->Arg(3)->Arg(5)->Arg(8)->Arg(16);

void BM_SolveHomotopy(benchmark::State& state) {
    const auto p = clustered_problem(static_cast<int>(state.range(0)), 1e-2);
    SolverOptions o;
    o.method = SolverMethod::homotopy;
    for (auto _ : state) benchmark::DoNotOptimize(solve(p, o).xi.data());
}
BENCHMARK(BM_SolveHomotopy)->Arg(3)->Arg(8);

void BM_SolveFixedPointNN(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const auto u = clustered_problem(d, 1e-2);
    const auto p = ImplicitProblem::tridiagonal(u.a, Vector::Constant(d - 1, 1e-2));
    for (auto _ : state) benchmark::DoNotOptimize(solve_fixed_point_nn(p, {}).x.data());
}
BENCHMARK(BM_SolveFixedPointNN)->Arg(3)->Arg(8);

void BM_StepSemiImplicit(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const auto sys = dyson_system(d, 4.0, linspace(d, -1.0, 1.0));
    const auto path = generate_brownian(1, d, 1.0, 64);
    const Vector dW = path.increments.row(0).transpose();
    for (auto _ : state) benchmark::DoNotOptimize(step_semi_implicit(sys, sys.x0(), 1.0 / 64, dW).state.data());
}
BENCHMARK(BM_StepSemiImplicit)->Arg(3)->Arg(5)->Arg(8);

void BM_SimulatePath(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto sys = dyson_system(3, 4.0, linspace(3, -1.0, 1.0));
    const auto path = generate_brownian(7, 3, 1.0, n);
    const TimeGrid grid(1.0, n);
    for (auto _ : state) benchmark::DoNotOptimize(simulate(sys, grid, path).min_gap);
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SimulatePath)->Arg(64)->Arg(512)->Arg(4096);

void BM_GenerateBrownian(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(generate_brownian(++seed, 5, 1.0, n).increments.data());
    state.SetItemsProcessed(state.iterations() * n * 5);
}
BENCHMARK(BM_GenerateBrownian)->Arg(1024)->Arg(4096);

void BM_ChiBar(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(chi_bar(d, 1.0));
}
BENCHMARK(BM_ChiBar)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
