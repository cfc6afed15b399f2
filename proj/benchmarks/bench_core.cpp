#include <benchmark/benchmark.h>

#include "attnscope/analysis.hpp"
#include "attnscope/corpus.hpp"
#include "attnscope/model.hpp"

namespace {

using namespace attnscope;

struct BenchSetup {
  std::vector<SentencePair> pairs;
  Vocab src_vocab;
  Vocab tgt_vocab;
  ModelParams params;

  BenchSetup(std::size_t hidden, std::size_t n_pairs) {
    pairs = synth_corpus(SynthSpec{n_pairs, 24, 17}).pairs;
    src_vocab = Vocab::build(pairs, Vocab::Side::Source, 5000);
    tgt_vocab = Vocab::build(pairs, Vocab::Side::Target, 5000);
    ModelConfig mc;
    mc.emb_dim = hidden;
    mc.hidden_dim = hidden;
    mc.layers = 2;
    mc.src_vocab = src_vocab.size();
    mc.tgt_vocab = tgt_vocab.size();
    Rng rng(mix_seed({17, 0x62656e63ULL}));
    params = ModelParams::init(mc, rng);
  }
};

void BM_matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  NoGradGuard no_grad;
  const Tensor a = Tensor::uniform({n, n}, -1, 1, rng).set_requires_grad(false);
  const Tensor b = Tensor::uniform({n, n}, -1, 1, rng).set_requires_grad(false);
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c.node());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_lstm_step(benchmark::State& state) {
  const std::size_t h = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  NoGradGuard no_grad;
  LstmCell cell{Tensor::uniform({h, 4 * h}, -0.1, 0.1, rng).set_requires_grad(false),
                Tensor::uniform({h, 4 * h}, -0.1, 0.1, rng).set_requires_grad(false),
                Tensor::uniform({1, 4 * h}, -0.1, 0.1, rng).set_requires_grad(false)};
  const Tensor x = Tensor::uniform({1, h}, -1, 1, rng).set_requires_grad(false);
  LstmState s{Tensor::zeros({1, h}), Tensor::zeros({1, h})};
  for (auto _ : state) {
    LstmState next = lstm_step(cell, x, s);
    benchmark::DoNotOptimize(next.h.node());
  }
}
BENCHMARK(BM_lstm_step)->Arg(64)->Arg(128);

void BM_train_step(benchmark::State& state) {
  BenchSetup setup(static_cast<std::size_t>(state.range(0)), 32);
  TrainConfig tc;
  tc.steps = 1;
  tc.batch_size = 4;
  tc.eval_interval = 1;
  tc.heldout_fraction = 0;
  for (auto _ : state) {
    // one optimizer step including the evaluation bookkeeping
    train(setup.params, setup.pairs, setup.src_vocab, setup.tgt_vocab, tc);
  }
}
BENCHMARK(BM_train_step)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_greedy_translate(benchmark::State& state) {
  BenchSetup setup(64, 16);
  const std::vector<int> ids = setup.src_vocab.encode_all(setup.pairs[0].source);
  for (auto _ : state) {
    TranslationTrace trace = greedy_translate(setup.params, ids, setup.pairs[0].source);
    benchmark::DoNotOptimize(trace.steps.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_greedy_translate)->Unit(benchmark::kMicrosecond);

void BM_analysis(benchmark::State& state) {
  BenchSetup setup(48, 20);
  std::vector<TranslationTrace> traces;
  for (const SentencePair& p : setup.pairs) {
    traces.push_back(
        greedy_translate(setup.params, setup.src_vocab.encode_all(p.source), p.source));
  }
  const FunctionWordList lexicon =
      FunctionWordList::from_tokens(synth_function_tokens(), "<synth>");
  const std::vector<Method> all(kMethodOrder.begin(), kMethodOrder.end());
  std::size_t tokens = 0;
  for (const auto& t : traces) tokens += t.steps.size();
  for (auto _ : state) {
    PreservationReport report =
        run_analysis(setup.params, traces, all, setup.tgt_vocab, lexicon, AnalysisConfig{});
    benchmark::DoNotOptimize(report.total_tokens);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(tokens));
  state.SetLabel(std::to_string(tokens) + " tokens x 8 methods");
}
BENCHMARK(BM_analysis)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
