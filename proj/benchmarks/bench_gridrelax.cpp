#include <benchmark/benchmark.h>

#include "gridrelax/ac_engine.hpp"
#include "gridrelax/conic_solver.hpp"
#include "gridrelax/matpower_io.hpp"
#include "gridrelax/relaxations.hpp"

using namespace gridrelax;

namespace {

const Network& base_case() {
    static const Network net = load_fixture(Fixture::kCase3Base);
    return net;
}

void BM_Parse(benchmark::State& state) {
    const std::string_view text = fixture_text(Fixture::kCase3Base);
    for (auto _ : state) benchmark::DoNotOptimize(to_network(parse_case(text)));
}
BENCHMARK(BM_Parse);

void BM_Build(benchmark::State& state) {
    const auto kind = static_cast<RelaxKind>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(build(kind, base_case()));
    state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_Build)->DenseRange(0, 3);

void BM_BuildAndSolve(benchmark::State& state) {
    const auto kind = static_cast<RelaxKind>(state.range(0));
    for (auto _ : state) {
        const SolveResult r = solve(build(kind, base_case()).model);
        benchmark::DoNotOptimize(r.objective);
    }
    state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_BuildAndSolve)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_Oracle(benchmark::State& state) {
    OracleOptions opts;
    opts.resolution = static_cast<int>(state.range(0));
    opts.refine_rounds = 1;
    for (auto _ : state) benchmark::DoNotOptimize(grid_oracle(base_case(), opts).objective);
}
BENCHMARK(BM_Oracle)->Arg(7)->Arg(11)->Unit(benchmark::kMillisecond);

void BM_Feasibility(benchmark::State& state) {
    const auto points = sample_feasible_points(base_case(), 64, 1);
    std::size_t k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(check_feasibility(base_case(), points[k++ % points.size()]).feasible);
    }
}
BENCHMARK(BM_Feasibility);

}  // namespace

BENCHMARK_MAIN();
