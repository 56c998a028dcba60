// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "tagan/model.hpp"
#include "tagan/synth_data.hpp"
#include "tagan/training.hpp"

namespace {

using namespace tagan;

ModelConfig bench_config() {
  ModelConfig cfg;
  cfg.vocab_size = synth::build_vocabulary().size();
  return cfg;
}

synth::Dataset bench_dataset() {
  synth::DatasetConfig cfg;
  cfg.n_train = 64;
  cfg.n_test = 48;
  cfg.seed = 11;
  return synth::build_dataset(cfg);
}

void BM_conditional_score(benchmark::State& state) {
  auto model = TaganModel<float>::create(bench_config(), 1);
  auto dataset = bench_dataset();
  const auto& sample = dataset.train.front();
  const auto ids = encode_caption(sample.captions[0], dataset.vocab).ids;
  for (auto _ : state) {
    ad::Graph<float> g;
    auto disc = model.discriminator.bind(g, true);
    auto score = disc.conditional_score(g.constant(sample.image), ids);
    benchmark::DoNotOptimize(score.d.item());
  }
}
BENCHMARK(BM_conditional_score);

void BM_generator_forward(benchmark::State& state) {
  auto model = TaganModel<float>::create(bench_config(), 1);
  auto dataset = bench_dataset();
  const auto& sample = dataset.train.front();
  const auto ids = encode_caption(sample.captions[0], dataset.vocab).ids;
  for (auto _ : state) {
    ad::Graph<float> g;
    auto gen = model.generator.bind(g, true);
    Rng rng(7);
    auto out = gen.generate(g.constant(sample.image), ids, rng);
    benchmark::DoNotOptimize(out.image.value().data());
  }
}
BENCHMARK(BM_generator_forward);

void BM_train_batch(benchmark::State& state) {
  auto model = TaganModel<float>::create(bench_config(), 1);
  auto dataset = bench_dataset();
  TrainSettings settings;
  settings.batch = static_cast<int>(state.range(0));
  Trainer<float> trainer(model, settings);
  std::vector<int> indices(static_cast<std::size_t>(settings.batch));
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);
  auto items = assemble_batch<float>(dataset, indices, 0, settings.seed, true);
  for (auto _ : state) {
    trainer.discriminator_step(items, settings.lr);
    trainer.generator_step(items, settings.lr);
  }
}
BENCHMARK(BM_train_batch)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
