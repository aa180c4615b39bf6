#include <benchmark/benchmark.h>

#include <random>

#include "asgdro/diffcore.hpp"
#include "asgdro/landscape.hpp"

using namespace asgdro;

namespace {

struct Problem {
    ModelSpec spec{{24, 64, 2}, Activation::ReLU};
    ParamVector params;
    Batch batch;

    explicit Problem(std::size_t rows) {
        params = init_params(spec, 7);
        std::mt19937_64 rng(11);
        std::normal_distribution<double> normal(0.0, 1.0);
        batch.inputs = Matrix(rows, 24);
        for (double& v : batch.inputs.data) v = normal(rng);
        for (std::size_t r = 0; r < rows; ++r) batch.labels.push_back(r % 2);
    }
};

void BM_LossGradParallel(benchmark::State& st) {
    const Problem p(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(loss_and_grad(p.spec, p.params, p.batch));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_LossGradSerial(benchmark::State& st) {
    const Problem p(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(serial::loss_and_grad(p.spec, p.params, p.batch));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_GridScanParallel(benchmark::State& st) {
    landscape::ScanParams sp;
    sp.resolution = static_cast<std::size_t>(st.range(0));
    const auto f = landscape::objective_by_id(landscape::scenario_a1(), "asgdro", sp);
    for (auto _ : st) benchmark::DoNotOptimize(landscape::grid_scan(f, sp.bounds, sp.resolution));
}

void BM_GridScanSerial(benchmark::State& st) {
    landscape::ScanParams sp;
    sp.resolution = static_cast<std::size_t>(st.range(0));
    const auto f = landscape::objective_by_id(landscape::scenario_a1(), "asgdro", sp);
    for (auto _ : st) benchmark::DoNotOptimize(landscape::serial::grid_scan(f, sp.bounds, sp.resolution));
}

}  // namespace

BENCHMARK(BM_LossGradParallel)->Arg(256)->Arg(4096)->Arg(32768);
BENCHMARK(BM_LossGradSerial)->Arg(256)->Arg(4096)->Arg(32768);
BENCHMARK(BM_GridScanParallel)->Arg(51)->Arg(101)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridScanSerial)->Arg(51)->Arg(101)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
