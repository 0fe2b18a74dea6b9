#include <benchmark/benchmark.h>

#include <random>

#include "tablefill/re_head.hpp"
#include "test_support.hpp"

using namespace tablefill;

namespace {

void BM_ScoreAll(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  Tensor3 q = testing::random_tensor(rng, n, 11, 20);
  Tensor3 k = testing::random_tensor(rng, n, 11, 20);
  for (auto _ : state) benchmark::DoNotOptimize(score_all(q, k));
  state.SetComplexityN(n);
}
BENCHMARK(BM_ScoreAll)->RangeMultiplier(2)->Range(8, 128)->Complexity();

void BM_NaiveCellLoop(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  Tensor3 q = testing::random_tensor(rng, n, 11, 20);
  Tensor3 k = testing::random_tensor(rng, n, 11, 20);
  for (auto _ : state) benchmark::DoNotOptimize(testing::naive_probs(q, k));
  state.SetComplexityN(n);
}
BENCHMARK(BM_NaiveCellLoop)->RangeMultiplier(2)->Range(8, 128)->Complexity();

void BM_DecodeOnce(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  RelScoreTable t = score_all(testing::random_tensor(rng, n, 11, 20), testing::random_tensor(rng, n, 11, 20));
  for (auto _ : state) benchmark::DoNotOptimize(decode_relations_once(t));
}
BENCHMARK(BM_DecodeOnce)->RangeMultiplier(2)->Range(8, 128);

}  // namespace
