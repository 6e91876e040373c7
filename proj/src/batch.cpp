#include "cmrx/batch.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cmrx {
namespace {

ScoredReport score_one(const SampleSet& s, const ReferenceTable& ranges, const std::vector<Formula>& ledger,
                       const ScoreParams& p) {
  try {
    return {aggregate(s, ranges, ledger, p)};
  } catch (const AllInvalidError&) {
    return {std::nullopt};
  }
}

void check_lengths(std::span<const CmrRecord> golds, std::span<const ParseOutcome> preds) {
  if (golds.size() != preds.size()) throw EvalError("gold and prediction lists differ in length");
}

}  // namespace

std::vector<ScoredReport> score_batch_serial(std::span<const SampleSet> sets, const ReferenceTable& ranges,
                                             const std::vector<Formula>& ledger, const ScoreParams& p) {
  std::vector<ScoredReport> out;
  out.reserve(sets.size());
  for (const auto& s : sets) out.push_back(score_one(s, ranges, ledger, p));
  return out;
}

std::vector<ScoredReport> score_batch_parallel(std::span<const SampleSet> sets, const ReferenceTable& ranges,
                                               const std::vector<Formula>& ledger, const ScoreParams& p) {
  std::vector<ScoredReport> out(sets.size());
  const auto n = static_cast<long long>(sets.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < n; ++i) out[i] = score_one(sets[i], ranges, ledger, p);
  return out;
}

std::vector<FieldLabels> label_batch_serial(std::span<const CmrRecord> golds, std::span<const ParseOutcome> preds) {
  check_lengths(golds, preds);
  std::vector<FieldLabels> out;
  out.reserve(golds.size());
  for (std::size_t i = 0; i < golds.size(); ++i) out.push_back(classify_record(golds[i], preds[i]));
  return out;
}

std::vector<FieldLabels> label_batch_parallel(std::span<const CmrRecord> golds, std::span<const ParseOutcome> preds) {
  check_lengths(golds, preds);
  std::vector<FieldLabels> out(golds.size());
  const auto n = static_cast<long long>(golds.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) out[i] = classify_record(golds[i], preds[i]);
  return out;
}

int batch_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_batch_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace cmrx
