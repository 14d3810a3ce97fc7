#include <benchmark/benchmark.h>

#include <vector>

#include "kgr/eval.hpp"
#include "kgr/io.hpp"
#include "kgr/rng.hpp"
#include "kgr/train.hpp"

using namespace kgr;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.next_real(-1.0, 1.0);
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  const Matrix a = random_matrix(n, n, rng);
  const Matrix b = random_matrix(n, n, rng);
  for (auto _ : state) {
    Matrix c = matmul(a, b);
    benchmark::DoNotOptimize(c);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128)->Complexity();

void BM_EncodeForward(benchmark::State& state) {
  const Dataset ds = synth(200, 3, 4, 42);
  const auto norms = norm_coefficients(ds.graph);
  const ModelParams params = init_params(ds.graph, {2, 16, DecoderForm::Full, false}, 1);
  for (auto _ : state) {
    NodeEmbeddings emb = encode(ds.graph, norms, params);
    benchmark::DoNotOptimize(emb);
  }
}
BENCHMARK(BM_EncodeForward);

void BM_TrainEpoch(benchmark::State& state) {
  const Dataset ds = synth(200, 3, 4, 42);
  const auto norms = norm_coefficients(ds.graph);
  TrainConfig config;
  const ModelParams params = init_params(ds.graph, config.shape(), 1);
  for (auto _ : state) {
    Rng rng = epoch_negative_rng(42, 0);
    const auto negatives = sample_negatives(ds.graph, ds.graph.triples(), 1, rng);
    ModelParams grads = zeros_like(params);
    LossBreakdown lb = compute_loss(ds.graph, norms, params, ds.graph.triples(), negatives, config, &grads);
    benchmark::DoNotOptimize(lb);
  }
}
BENCHMARK(BM_TrainEpoch);

void BM_Auc(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  std::vector<ScoredPair> scored;
  scored.reserve(n);
  for (int i = 0; i < n; ++i) {
    scored.push_back({{0, 0, 0}, rng.next_real(), i % 3 == 0});
  }
  for (auto _ : state) {
    double a = auc(scored);
    benchmark::DoNotOptimize(a);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_Auc)->RangeMultiplier(10)->Range(1000, 100000)->Complexity();

void BM_SampleNegatives(benchmark::State& state) {
  const Dataset ds = synth(200, 3, 4, 42);
  for (auto _ : state) {
    Rng rng(7);
    auto negs = sample_negatives(ds.graph, ds.graph.triples(), 2, rng);
    benchmark::DoNotOptimize(negs);
  }
}
BENCHMARK(BM_SampleNegatives);

}  // namespace

BENCHMARK_MAIN();
