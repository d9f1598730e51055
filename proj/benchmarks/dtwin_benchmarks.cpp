#include <benchmark/benchmark.h>

#include "dtwin/classify.hpp"
#include "dtwin/dataset.hpp"
#include "dtwin/lumped_model.hpp"
#include "dtwin/physical_twin.hpp"

using namespace dtwin;

namespace {

void BM_FrfSolveLumped(benchmark::State& state) {
  const LumpedParameters p;
  const auto sys = build_lumped(p, apply_damage(DamageScenario::healthy(), p.stiffness));
  const auto grid = linear_grid(0.0, 8000.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(frf_solve(sys, p.damping, HarmonicLoad{6, 1e4}, grid));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FrfSolveLumped)->Arg(801)->Arg(8001);

void BM_FrfSolveBar(benchmark::State& state) {
  const BarProperties bar;
  const auto sys = assemble_bar(bar);
  const auto grid = linear_grid(0.0, 8000.0, 801);
  for (auto _ : state) benchmark::DoNotOptimize(frf_solve(sys, bar.damping, HarmonicLoad{40, 1e4}, grid));
  state.SetItemsProcessed(state.iterations() * 801);
}
BENCHMARK(BM_FrfSolveBar);

void BM_Generate(benchmark::State& state) {
  GenerationConfig c;
  for (auto _ : state) benchmark::DoNotOptimize(generate(c, static_cast<std::size_t>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * 1800);
}
BENCHMARK(BM_Generate)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_FitQda(benchmark::State& state) {
  const auto data = generate(GenerationConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(fit_qda(data));
}
BENCHMARK(BM_FitQda)->Unit(benchmark::kMicrosecond);

void BM_Predict(benchmark::State& state) {
  const auto data = generate(GenerationConfig{});
  const Classifier model = fit(static_cast<ClassifierKind>(state.range(0)), data);
  Eigen::Index row = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(model, data.features.row(row).transpose()));
    row = (row + 1) % data.features.rows();
  }
  state.SetLabel(std::string(to_string(kind_of(model))));
}
BENCHMARK(BM_Predict)->DenseRange(0, 3);

}  // namespace

BENCHMARK_MAIN();
