// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include "slubench/asr_sim.hpp"
#include "slubench/corpus.hpp"
#include "slubench/models.hpp"
#include "slubench/nn/kernels.hpp"
#include "slubench/rng.hpp"

using namespace slubench;

namespace {

nn::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  nn::Matrix m(r, c);
  for (auto& v : m.data) v = rng.uniform(-1, 1);
  return m;
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  nn::Matrix c(n, n);
  for (auto _ : state) {
    if constexpr (Parallel) nn::kernels::gemm(a, false, b, false, c, false);
    else nn::kernels::gemm_serial(a, false, b, false, c, false);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

struct CorruptionInput {
  std::vector<Tokens> transcripts;
  std::vector<std::string> keys;
  asr::NoiseProfile profile;
};

const CorruptionInput& corruption_input() {
  static const CorruptionInput in = [] {
    CorruptionInput x;
    auto g = corpus::default_grammar();
    for (const auto& r : corpus::generate_synthetic_corpus(g, 1000)) {
      x.transcripts.push_back(tokenize(r.transcript));
      x.keys.push_back(r.id);
    }
    x.profile = asr::preset("unadapted", g.vocabulary(), 5);
    return x;
  }();
  return in;
}

template <bool Parallel>
void BM_corrupt_corpus(benchmark::State& state) {
  const auto& in = corruption_input();
  for (auto _ : state) {
    auto out = Parallel ? asr::corrupt_corpus(in.transcripts, in.keys, in.profile)
                        : asr::corrupt_corpus_serial(in.transcripts, in.keys, in.profile);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.transcripts.size()));
}

template <bool Parallel>
void BM_batch_gradient(benchmark::State& state) {
  auto records = corpus::generate_synthetic_corpus(corpus::default_grammar(), 4);
  std::vector<Tokens> sentences;
  for (const auto& r : records) sentences.push_back(tokenize(r.transcript));
  auto labels = models::LabelSpace::build(records);
  models::ModelConfig cfg;
  cfg.n_intents = labels.intents().size();
  cfg.n_slot_tags = labels.slot_tags().size();
  models::Model model(cfg, models::Vocabulary::build(sentences), labels);
  std::vector<models::Example> examples;
  for (std::size_t i = 0; i < records.size(); ++i)
    examples.push_back({{sentences[i], {}, {}}, labels.intent_index(records[i].intent), {}});
  std::vector<const models::Example*> batch;
  for (const auto& e : examples) batch.push_back(&e);
  for (auto _ : state) benchmark::DoNotOptimize(models::batch_gradient(model, batch, Parallel));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}

}  // namespace

BENCHMARK(BM_gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_gemm<true>)->Name("gemm/omp")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_corrupt_corpus<false>)->Name("corrupt_corpus/serial");
BENCHMARK(BM_corrupt_corpus<true>)->Name("corrupt_corpus/omp");
BENCHMARK(BM_batch_gradient<false>)->Name("batch_gradient/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch_gradient<true>)->Name("batch_gradient/omp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
