#include <benchmark/benchmark.h>

#include "tablefill/commands.hpp"
#include "tablefill/model.hpp"
#include "tablefill/trainer.hpp"

using namespace tablefill;

namespace {

Model& toy() {
  static Model m = Model::from_corpus(ModelConfig::toy(), sample_corpus());
  return m;
}

void BM_EncoderForward(benchmark::State& state) {
  const Model& m = toy();
  std::vector<std::string> tokens(static_cast<std::size_t>(state.range(0)), "Lond");
  tokens.front() = "[CLS]";
  for (auto _ : state) benchmark::DoNotOptimize(m.encoder().encode(tokens));
}
BENCHMARK(BM_EncoderForward)->Arg(8)->Arg(32)->Arg(64);

void BM_PredictDocument(benchmark::State& state) {
  const Model& m = toy();
  const Corpus corpus = sample_corpus();
  for (auto _ : state) {
    for (const Document& d : corpus) benchmark::DoNotOptimize(m.predict(d));
  }
}
BENCHMARK(BM_PredictDocument);

void BM_LossAndBackward(benchmark::State& state) {
  Model& m = toy();
  std::vector<Sentence> batch;
  for (const Document& d : sample_corpus()) batch.insert(batch.end(), d.sentences.begin(), d.sentences.end());
  for (auto _ : state) {
    m.params().zero_grad();
    Graph g;
    g.backward(total_loss(g, m, batch, LossReduction::kSum));
  }
}
BENCHMARK(BM_LossAndBackward);

}  // namespace
