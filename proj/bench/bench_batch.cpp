// Serial reference vs OpenMP kernels over a synthetic batch.
//   ./bench_batch --benchmark_filter=Score

#include <benchmark/benchmark.h>

#include "cmrx/batch.hpp"
#include "cmrx/gateway.hpp"
#include "cmrx/synth.hpp"

using namespace cmrx;

namespace {

const std::vector<SampleSet>& sample_sets() {
  static const auto sets = [] {
    std::vector<SampleSet> out;
    for (std::uint64_t i = 0; i < 2000; ++i) {
      const auto gold = sample_gold(i, kNamedCategories[i % kNamedCategories.size()]);
      SampleSet s;
      s.report_id = std::to_string(i);
      for (int a = 0; a < 3; ++a) {
        NoiseProfile noise;
        noise.dropout = 0.03;
        noise.jitter_rate = 0.1;
        noise.seed = i * 3 + static_cast<std::uint64_t>(a);
        s.attempts.push_back(parse_record(mock_extract(s.report_id, gold, noise)));
      }
      out.push_back(std::move(s));
    }
    return out;
  }();
  return sets;
}

struct LabelCases {
  std::vector<CmrRecord> golds;
  std::vector<ParseOutcome> preds;
};

const LabelCases& label_cases() {
  static const auto cases = [] {
    LabelCases c;
    CorruptionPlan plan;
    plan.omission = plan.inexact = plan.confusion = 0.05;
    plan.fabrication = 0.05;
    plan.truncation = 0.01;
    for (std::uint64_t i = 0; i < 20000; ++i) {
      c.golds.push_back(sample_gold(i, kNamedCategories[i % kNamedCategories.size()]));
      plan.seed = i;
      c.preds.push_back(corrupt(c.golds.back(), plan).pred);
    }
    return c;
  }();
  return cases;
}

void BM_ScoreSerial(benchmark::State& state) {
  const auto& sets = sample_sets();
  const ScoreParams p;
  for (auto _ : state)
    benchmark::DoNotOptimize(score_batch_serial(sets, default_reference_table(), default_ledger(), p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sets.size()));
}

void BM_ScoreParallel(benchmark::State& state) {
  const auto& sets = sample_sets();
  const ScoreParams p;
  set_batch_threads(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(score_batch_parallel(sets, default_reference_table(), default_ledger(), p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sets.size()));
}

void BM_LabelSerial(benchmark::State& state) {
  const auto& c = label_cases();
  for (auto _ : state) benchmark::DoNotOptimize(label_batch_serial(c.golds, c.preds));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c.golds.size()));
}

void BM_LabelParallel(benchmark::State& state) {
  const auto& c = label_cases();
  set_batch_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(label_batch_parallel(c.golds, c.preds));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c.golds.size()));
}

}  // namespace

BENCHMARK(BM_ScoreSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ScoreParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LabelSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LabelParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
