#include <benchmark/benchmark.h>

#include <vector>

#include "fedtier/aggregation.hpp"
#include "fedtier/codec.hpp"
#include "fedtier/nn.hpp"
#include "fedtier/random.hpp"

using namespace fedtier;

namespace {

Tensor noise_batch(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor t({n, 1, kImageSide, kImageSide});
  for (double& v : t.values()) v = rng.uniform(-0.4, 2.8);
  return t;
}

std::vector<int> cycle_labels(std::size_t n) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % kNumClasses);
  return labels;
}

void BM_Forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ModelParams params = init_params(SimpleCnnArch::standard(), 1);
  const Tensor batch = noise_batch(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(64);

void BM_LossAndGradients(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ModelParams params = init_params(SimpleCnnArch::standard(), 1);
  const Tensor batch = noise_batch(n, 3);
  const auto labels = cycle_labels(n);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(params, batch, labels));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGradients)->Arg(1)->Arg(64);

void BM_FedAvg(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  std::vector<ModelParams> models;
  for (std::size_t i = 0; i < k; ++i) models.push_back(init_params(SimpleCnnArch::standard(), i));
  std::vector<WeightedParams> inputs;
  for (std::size_t i = 0; i < k; ++i) inputs.push_back({&models[i], 100.0 + static_cast<double>(i)});
  for (auto _ : state) benchmark::DoNotOptimize(fedavg(inputs));
}
BENCHMARK(BM_FedAvg)->Arg(2)->Arg(3)->Arg(10);

void BM_Encode(benchmark::State& state) {
  const ModelParams params = init_params(SimpleCnnArch::standard(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(encode_params(params));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(encoded_size(SimpleCnnArch::standard())));
}
BENCHMARK(BM_Encode);

void BM_Decode(benchmark::State& state) {
  const auto arch = SimpleCnnArch::standard();
  const Bytes bytes = encode_params(init_params(arch, 1));
  for (auto _ : state) benchmark::DoNotOptimize(decode_params(bytes, arch));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_Decode);

}  // namespace
BENCHMARK_MAIN();
