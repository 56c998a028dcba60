// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "tagan/autodiff.hpp"
#include "tagan/rng.hpp"

namespace {

using namespace tagan;

TensorData<float> random_tensor(Shape shape, std::uint64_t seed) {
  TensorData<float> t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data) v = static_cast<float>(rng.normal());
  return t;
}

void BM_conv2d_forward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  auto x = random_tensor({c, 16, 16}, 1);
  auto k = random_tensor({2 * c, c, 3, 3}, 2);
  for (auto _ : state) {
    ad::Graph<float> g;
    auto y = ad::conv2d(g.constant(x), g.constant(k), 2, 1);
    benchmark::DoNotOptimize(y.value().data());
  }
}
BENCHMARK(BM_conv2d_forward)->Arg(16)->Arg(32)->Arg(64);

void BM_conv2d_train_step(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  auto x = random_tensor({c, 16, 16}, 1);
  ParamStore<float> store;
  auto& k = store.create("k", {2 * c, c, 3, 3});
  Rng rng(3);
  init_normal(k, rng, 0.1);
  for (auto _ : state) {
    ad::Graph<float> g;
    auto y = ad::conv2d(g.constant(x), g.param(k), 2, 1);
    auto loss = ad::mean(ad::mul(y, y));
    g.backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_conv2d_train_step)->Arg(16)->Arg(32)->Arg(64);

void BM_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_tensor({n, n}, 1);
  auto b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    ad::Graph<float> g;
    auto c = ad::matmul(g.constant(a), g.constant(b));
    benchmark::DoNotOptimize(c.value().data());
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_matmul)->RangeMultiplier(2)->Range(16, 256)->Complexity();

}  // namespace

BENCHMARK_MAIN();
