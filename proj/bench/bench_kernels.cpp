#include <benchmark/benchmark.h>

#include "infolimit/kernels.hpp"
#include "infolimit/random.hpp"
#include "infolimit/simulate.hpp"

namespace {

using namespace infolimit;

LoopSpec bench_loop() {
    LoopSpec spec;
    Matrix a(3, 3);
    a << 0.5, 0.2, 0.0, -0.1, 0.4, 0.3, 0.0, 0.1, -0.3;
    spec.plant = StateSpace(a, Matrix::Ones(3, 1), Matrix::Constant(1, 3, 0.4), Matrix::Zero(1, 1));
    spec.controller = StateSpace::gain(-0.3);
    spec.x0_covariance = Matrix::Identity(3, 3);
    return spec;
}

void frequency_response(benchmark::State& state, bool parallel) {
    const ClosedLoop loop = close_loop(bench_loop());
    const auto grid = static_cast<std::size_t>(state.range(0));
    FrequencyResponse out(grid, loop.loop.outputs(), loop.loop.inputs());
    for (auto _ : state) {
        if (parallel)
            kernels::frequency_response_omp(loop.loop, out);
        else
            kernels::frequency_response_serial(loop.loop, out);
        benchmark::DoNotOptimize(out.raw().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void unroll(benchmark::State& state, bool parallel) {
    const ClosedLoop loop = close_loop(bench_loop());
    const StateSpace& aug = loop.augmented;
    const Matrix& p0 = loop.initial_covariance;
    const Matrix cross = p0.leftCols(loop.plant_states);
    const Matrix x0 = p0.topLeftCorner(loop.plant_states, loop.plant_states);
    const auto n = static_cast<std::size_t>(state.range(0));
    const kernels::UnrollProblem problem{aug.a(), aug.b(), aug.c(), aug.d(), p0, cross, x0, n};
    const Eigen::Index side = loop.plant_states + aug.outputs() * static_cast<Eigen::Index>(n);
    Matrix out(side, side);
    for (auto _ : state) {
        if (parallel)
            kernels::unroll_covariance_omp(problem, out);
        else
            kernels::unroll_covariance_serial(problem, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void moments(benchmark::State& state, bool parallel) {
    Rng rng(7);
    Matrix samples(state.range(0), 64);
    for (Eigen::Index j = 0; j < samples.cols(); ++j)
        for (Eigen::Index i = 0; i < samples.rows(); ++i) samples(i, j) = rng.gaussian();
    for (auto _ : state) {
        Matrix m = parallel ? kernels::second_moment_omp(samples) : kernels::second_moment_serial(samples);
        benchmark::DoNotOptimize(m.data());
    }
}

void simulate(benchmark::State& state, bool parallel) {
    LoopSpec spec = bench_loop();
    spec.horizon = 200;
    const ClosedLoop loop = close_loop(spec);
    Trace trace = simulate_paths(spec, static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        if (parallel)
            kernels::simulate_omp(spec, loop, trace);
        else
            kernels::simulate_serial(spec, loop, trace);
        benchmark::DoNotOptimize(trace.y.data());
    }
}

}  // namespace

BENCHMARK_CAPTURE(frequency_response, serial, false)->Arg(8192)->Arg(65536);
BENCHMARK_CAPTURE(frequency_response, omp, true)->Arg(8192)->Arg(65536);
BENCHMARK_CAPTURE(unroll, serial, false)->Arg(250)->Arg(1000);
BENCHMARK_CAPTURE(unroll, omp, true)->Arg(250)->Arg(1000);
BENCHMARK_CAPTURE(moments, serial, false)->Arg(5000)->Arg(50000);
BENCHMARK_CAPTURE(moments, omp, true)->Arg(5000)->Arg(50000);
BENCHMARK_CAPTURE(simulate, serial, false)->Arg(1000);
BENCHMARK_CAPTURE(simulate, omp, true)->Arg(1000);

BENCHMARK_MAIN();
