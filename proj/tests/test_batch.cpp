#include <doctest.h>

#include "cmrx/batch.hpp"
#include "cmrx/gateway.hpp"
#include "cmrx/synth.hpp"

using namespace cmrx;

namespace {

std::vector<SampleSet> noisy_sets(std::size_t n) {
  std::vector<SampleSet> sets;
  for (std::size_t i = 0; i < n; ++i) {
    const auto gold = sample_gold(i, kNamedCategories[i % 5]);
    SampleSet s;
    s.report_id = std::to_string(i);
    for (int a = 0; a < 3; ++a) {
      NoiseProfile noise;
      noise.dropout = 0.05;
      noise.jitter_rate = 0.1;
      noise.swap_rate = 0.02;
      noise.truncation_rate = i % 17 == 0 ? 1.0 : 0.05;
      noise.seed = i * 3 + static_cast<std::uint64_t>(a);
      s.attempts.push_back(parse_record(mock_extract(s.report_id, gold, noise)));
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

}  // namespace

TEST_CASE("parallel scoring matches the serial reference exactly") {
  const auto sets = noisy_sets(400);
  const ScoreParams p;
  const auto ser = score_batch_serial(sets, default_reference_table(), default_ledger(), p);
  for (int threads : {1, 2, 4, 7}) {
    set_batch_threads(threads);
    const auto par = score_batch_parallel(sets, default_reference_table(), default_ledger(), p);
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < ser.size(); ++i) {
      REQUIRE(par[i].result.has_value() == ser[i].result.has_value());
      if (!ser[i].result) continue;
      CHECK(par[i].result->record == ser[i].result->record);
      for (std::size_t f = 0; f < kFieldCount; ++f) {
        CHECK(par[i].result->bundle.fields[f].final == ser[i].result->bundle.fields[f].final);
        CHECK(par[i].result->bundle.fields[f].flagged == ser[i].result->bundle.fields[f].flagged);
      }
    }
  }
  std::size_t invalid = 0;
  for (const auto& r : ser) invalid += !r.result;
  CHECK(invalid >= 400 / 17);
}

TEST_CASE("parallel labeling matches the serial reference exactly") {
  CorruptionPlan plan;
  plan.omission = plan.inexact = plan.confusion = 0.05;
  plan.fabrication = 0.1;
  plan.truncation = 0.03;
  std::vector<CmrRecord> golds;
  std::vector<ParseOutcome> preds;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    golds.push_back(sample_gold(i, kNamedCategories[i % 5]));
    plan.seed = i;
    preds.push_back(corrupt(golds.back(), plan).pred);
  }
  set_batch_threads(4);
  CHECK(label_batch_parallel(golds, preds) == label_batch_serial(golds, preds));
  CHECK(batch_threads() >= 1);
}
