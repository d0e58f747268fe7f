#include <benchmark/benchmark.h>

#include <vector>

#include "fedaboost/data.hpp"
#include "fedaboost/federation.hpp"
#include "fedaboost/losses.hpp"
#include "fedaboost/nn.hpp"
#include "fedaboost/rng.hpp"

namespace {

using namespace fedaboost;

Matrix random_inputs(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  return x;
}

void BM_ForwardBackward(benchmark::State& state) {
  const std::vector<std::size_t> sizes{784, 128, 10};
  const auto model = init_mlp(sizes, 1);
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  const Matrix x = random_inputs(batch, 784, 2);
  std::vector<int> labels(static_cast<std::size_t>(batch));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
  const FocalLossParams params(2.0, 1.0);
  for (auto _ : state) {
    auto pass = forward(model, x);
    const auto loss = focal_loss(softmax(pass.logits), labels, params);
    benchmark::DoNotOptimize(backward(model, pass.cache, loss.grad_logits));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(128);

void BM_Combine(benchmark::State& state) {
  const std::vector<std::size_t> sizes{784, 128, 10};
  std::vector<ModelParameters> models;
  std::vector<double> coeffs;
  for (int i = 0; i < state.range(0); ++i) {
    models.push_back(init_mlp(sizes, static_cast<std::uint64_t>(i)));
    coeffs.push_back(1.0 + i);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(combine(std::span<const ModelParameters>(models), coeffs));
  }
}
BENCHMARK(BM_Combine)->Arg(15)->Arg(79);

void BM_ClientUpdate(benchmark::State& state) {
  const Dataset data = gen_synthetic(10, 784, 30, 4.0, 3);
  const ClientDataset client = split_client(data, 0.2, 0.2, 4, 1);
  const std::vector<std::size_t> sizes{784, 128, 10};
  const auto global = init_mlp(sizes, 5);
  FederationConfig config;
  config.total_clients = 1;
  config.total_rounds = 1;
  config.optimizer.learning_rate = 1e-3;
  ClientBoostState boost;
  boost.weight = 1.0 / 15.0;
  for (auto _ : state) {
    Rng rng(6);
    benchmark::DoNotOptimize(client_update(client, boost, global, config, rng));
  }
}
BENCHMARK(BM_ClientUpdate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
