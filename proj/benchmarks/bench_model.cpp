#include <benchmark/benchmark.h>

#include <random>

#include "sman/attention.hpp"
#include "sman/evaluation.hpp"
#include "sman/synthetic.hpp"
#include "sman/text_cnn.hpp"
#include "sman/training.hpp"

using namespace sman;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m({r, c});
  for (auto& v : m.data()) v = normal(rng);
  return m;
}

const Corpus& planted() {
  static const Corpus corpus = [] {
    SyntheticConfig g;
    g.vocab = 200;
    g.text_signal = 0.3;
    return generate_synthetic(g, 7);
  }();
  return corpus;
}

ModelConfig bench_model() {
  ModelConfig m;
  m.word_dim = 50;
  return m;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1);
  const auto b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(100)->Arg(300);

static void BM_AttentionBlock(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto mode = state.range(1) ? MaskMode::Hard : MaskMode::Literal;
  Params params;
  std::mt19937_64 rng(3);
  AttentionBlock block{"attn", 7, 100, mode};
  block.register_params(params, rng, 0.02);
  const auto users = random_matrix(n + 1, 100, 4);
  Matrix mask({n, n});
  for (std::size_t i = 0; i + 1 < n; ++i) mask(i, i + 1) = mask(i + 1, i) = 0.5;
  for (auto _ : state) {
    RealTape tape;
    auto out = encode_users(block.bind(tape, params), tape.constant(users), mask, mode);
    auto loss = ad::sum_squares(out);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.value()[0]);
  }
}
BENCHMARK(BM_AttentionBlock)->Args({100, 0})->Args({220, 0})->Args({220, 1});

static void BM_TextCnn(benchmark::State& state) {
  CnnSpec spec{{3, 4, 5}, 100, static_cast<std::size_t>(state.range(0))};
  Params params;
  std::mt19937_64 rng(5);
  spec.register_params(params, rng);
  const auto words = random_matrix(200, spec.word_dim, 6);
  std::vector<TokenId> tokens(30);
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<TokenId>(1 + i * 7 % 199);
  for (auto _ : state) {
    RealTape tape;
    auto out = encode_news_text(tokens, tape.constant(words), bind_cnn(spec, tape, params));
    auto loss = ad::sum_squares(out);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.value()[0]);
  }
}
BENCHMARK(BM_TextCnn)->Arg(50)->Arg(300);

static void BM_GraphInputs(benchmark::State& state) {
  const auto& corpus = planted();
  const auto model = bench_model();
  for (auto _ : state) benchmark::DoNotOptimize(build_graph_inputs(corpus, model));
}
BENCHMARK(BM_GraphInputs)->Unit(benchmark::kMillisecond);

static void BM_JointLossBatch(benchmark::State& state) {
  const auto& corpus = planted();
  const auto model = bench_model();
  const auto split = split_corpus(corpus, 1);
  const auto inputs = build_graph_inputs(corpus, model);
  const auto targets = credibility_targets(corpus, annotate_credibility(corpus, split.train));
  auto examples = examples_for(corpus, split.train);
  examples.resize(32);
  Params params;
  init_parameters(params, model, dims_of(corpus), 1);
  for (auto _ : state) {
    const auto terms = joint_loss(params, model, inputs, targets, examples, 1e-6, Variant::Full, true);
    benchmark::DoNotOptimize(terms.total);
  }
}
BENCHMARK(BM_JointLossBatch)->Unit(benchmark::kMillisecond);

static void BM_ComputeMetrics(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(8);
  std::vector<std::size_t> preds(n), labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    preds[i] = rng() % 4;
    labels[i] = rng() % 4;
  }
  for (auto _ : state) benchmark::DoNotOptimize(compute_metrics(preds, labels, 4));
}
BENCHMARK(BM_ComputeMetrics)->Arg(1000)->Arg(100000);

BENCHMARK_MAIN();
