#include <benchmark/benchmark.h>

#include "uvqa/autograd.hpp"
#include "uvqa/fusion.hpp"
#include "uvqa/rng.hpp"
#include "uvqa/synthetic.hpp"
#include "uvqa/training.hpp"

using namespace uvqa;

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

struct Fixture {
  std::vector<QARecord> records;
  Model model;
};

Fixture desk_model() {
  SynthConfig cfg;
  cfg.scenes = 64;
  auto records = generate_synthetic(cfg, 1).records;
  ModelConfig mc;
  mc.object_dim = cfg.object_dim;
  mc.appearance_dim = cfg.appearance_dim;
  Model model(mc, AnswerVocabulary::build(records, 1000), WordVocabulary::build(records, 1000), 2);
  return {std::move(records), std::move(model)};
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(0);
  const Tensor a = random_tensor(n, 64, rng), b = random_tensor(64, 64, rng);
  for (auto _ : state) {
    Graph g(Graph::Mode::inference);
    benchmark::DoNotOptimize(g.value(g.matmul(g.constant(a), g.constant(b))));
  }
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64);

void BM_TrainStep(benchmark::State& state) {
  Fixture f = desk_model();
  AdamW optimizer;
  std::vector<const QARecord*> batch;
  for (std::size_t i = 0; i < 16; ++i) batch.push_back(&f.records[i]);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(batch, f.model, optimizer));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_DecodeGreedy(benchmark::State& state) {
  Fixture f = desk_model();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(decode_greedy(f.records[i++ % f.records.size()], f.model));
}
BENCHMARK(BM_DecodeGreedy)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
