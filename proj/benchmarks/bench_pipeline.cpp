#include <benchmark/benchmark.h>

#include <sstream>

#include "deepspace/eval.hpp"
#include "deepspace/synth.hpp"

namespace {

using namespace deepspace;

std::vector<UdrRecord> thousand_records() {
  const auto world = generate_world(3, 4, WorldConfig{}, 11);
  const auto persona = make_persona(world, 0.9, 12);
  return generate_trajectory(world, persona, "u", 5, 200, 13);
}

void BM_CleanPipeline(benchmark::State& state) {
  const auto records = inject_anomalies(thousand_records(), 0.05, 14).records;
  for (auto _ : state) {
    benchmark::DoNotOptimize(clean_pipeline(records, CleanConfig{}));
  }
  state.SetItemsProcessed(state.iterations() * records.size());
}
BENCHMARK(BM_CleanPipeline);

void BM_ParseCsv(benchmark::State& state) {
  std::ostringstream out;
  write_udr_csv(out, thousand_records());
  const std::string text = out.str();
  for (auto _ : state) {
    std::istringstream in(text);
    benchmark::DoNotOptimize(parse_udr_csv(in));
  }
}
BENCHMARK(BM_ParseCsv);

void BM_AssembleDataset(benchmark::State& state) {
  const auto trajectories = clean_pipeline(thousand_records(), CleanConfig{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_dataset(trajectories, 50, 0.8));
  }
}
BENCHMARK(BM_AssembleDataset);

void BM_Predict(benchmark::State& state) {
  const auto trajectories = clean_pipeline(thousand_records(), CleanConfig{});
  TrainConfig cfg;
  cfg.window = 50;
  const auto dataset = assemble_dataset(trajectories, cfg.window, 0.8);
  const auto model = build_hier_model(dataset.index, cfg);
  const auto& event = dataset.test.front();
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(model, event.fine_window, event.coarse_window));
  }
}
BENCHMARK(BM_Predict);

void BM_OnlineTraining(benchmark::State& state) {
  const auto trajectories = clean_pipeline(thousand_records(), CleanConfig{});
  TrainConfig cfg;
  cfg.window = 50;
  cfg.batch_size = 16;
  const auto dataset = assemble_dataset(trajectories, cfg.window, 0.8);
  for (auto _ : state) {
    state.PauseTiming();
    HierModel model = build_hier_model(dataset.index, cfg);
    state.ResumeTiming();
    train_online(dataset.train, model, cfg);
    benchmark::DoNotOptimize(model);
  }
  state.SetItemsProcessed(state.iterations() * dataset.train.size());
}
BENCHMARK(BM_OnlineTraining)->Unit(benchmark::kMillisecond);

}  // namespace
