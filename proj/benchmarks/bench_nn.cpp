#include <benchmark/benchmark.h>

#include "deepspace/nn.hpp"
#include "deepspace/rng.hpp"

namespace {

using namespace deepspace;

// The production-sized fine model: 40 one-hot channels over a 50-record
// window, 25 filters.
CnnModel fine_model() {
  TrainConfig cfg;
  cfg.window = 50;
  return init_model(40, 10, cfg, 1);
}

std::vector<Sample> random_batch(std::size_t count, std::size_t window,
                                 std::size_t channels, std::size_t classes,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> batch(count);
  for (auto& sample : batch) {
    sample.window.resize(window);
    for (int& l : sample.window) l = static_cast<int>(rng.uniform_int(channels));
    sample.target = static_cast<int>(rng.uniform_int(classes));
  }
  return batch;
}

void BM_Conv1dForward(benchmark::State& state) {
  Rng rng(2);
  Tensor input = Tensor::zeros({40, 50});
  for (double& v : input.data) v = rng.uniform(-1.0, 1.0);
  const auto model = fine_model();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        conv1d_forward(input, model.conv_kernels, model.conv_bias));
  }
}
BENCHMARK(BM_Conv1dForward);

void BM_Conv1dBackward(benchmark::State& state) {
  Rng rng(3);
  Tensor input = Tensor::zeros({40, 50});
  for (double& v : input.data) v = rng.uniform(-1.0, 1.0);
  const auto model = fine_model();
  Tensor d_out = Tensor::zeros({25, 46});
  for (double& v : d_out.data) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        conv1d_backward(input, model.conv_kernels, d_out, false));
  }
}
BENCHMARK(BM_Conv1dBackward);

void BM_ForwardWindow(benchmark::State& state) {
  const auto model = fine_model();
  const auto batch = random_batch(1, 50, 40, 10, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_window(model, batch[0].window));
  }
}
BENCHMARK(BM_ForwardWindow);

void BM_TrainStep(benchmark::State& state) {
  auto model = fine_model();
  const auto batch = random_batch(state.range(0), 50, 40, 10, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(model, batch, 0.05));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(4)->Arg(16)->Arg(32);

void BM_GradCheckSmall(benchmark::State& state) {
  TrainConfig cfg;
  cfg.window = 12;
  const auto model = init_model(5, 4, cfg, 6);
  const auto batch = random_batch(1, 12, 5, 4, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(grad_check(model, batch[0], 1e-5));
  }
}
BENCHMARK(BM_GradCheckSmall);

}  // namespace
