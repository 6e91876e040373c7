#pragma once

// Data-parallel kernels over many reports. Each *_parallel kernel has a
// serial reference with identical results; tests compare the two and the
// benchmark target times them.

#include <optional>
#include <span>
#include <vector>

#include "cmrx/confidence.hpp"
#include "cmrx/eval.hpp"

namespace cmrx {

struct ScoredReport {
  std::optional<Aggregate> result;  // nullopt: every sample failed to parse
};

std::vector<ScoredReport> score_batch_serial(std::span<const SampleSet> sets, const ReferenceTable& ranges,
                                             const std::vector<Formula>& ledger, const ScoreParams& p);
std::vector<ScoredReport> score_batch_parallel(std::span<const SampleSet> sets, const ReferenceTable& ranges,
                                               const std::vector<Formula>& ledger, const ScoreParams& p);

std::vector<FieldLabels> label_batch_serial(std::span<const CmrRecord> golds, std::span<const ParseOutcome> preds);
std::vector<FieldLabels> label_batch_parallel(std::span<const CmrRecord> golds, std::span<const ParseOutcome> preds);

/// Number of worker threads the parallel kernels will use (1 without OpenMP).
int batch_threads();
void set_batch_threads(int n);

}  // namespace cmrx
