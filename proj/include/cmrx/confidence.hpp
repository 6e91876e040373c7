#pragma once

// Per-field quality scoring: distribution plausibility, sampling stability,
// cross-field consistency, and their average.

#include <array>
#include <string>
#include <vector>

#include "cmrx/gateway_types.hpp"
#include "cmrx/ledger.hpp"
#include "cmrx/record.hpp"

namespace cmrx {

struct ScoreParams {
  double alpha = 6.0;
  double beta = 2.0;
  double default_score = 0.7;
  double review_threshold = 0.7;
  int n_samples = 3;
  double temperature = 0.3;

  /// Throws std::invalid_argument when a parameter is out of its domain.
  void validate() const;
};

struct FieldScores {
  double dist = 0;
  double stab = 0;
  double cons = 0;
  double final = 0;
  bool flagged = false;
};

struct ConfidenceBundle {
  std::array<FieldScores, kFieldCount> fields{};

  FieldScores& operator[](FieldId f) { return fields[index_of(f)]; }
  const FieldScores& operator[](FieldId f) const { return fields[index_of(f)]; }

  std::vector<FieldId> flagged() const;
};

/// exp(-1/2 ((v - mu) / (alpha sigma))^2), maximized over the available sex
/// rows. Null values and fields without a reference row get default_score.
double distribution_score(FieldId field, const FieldValue& v, const ReferenceTable& ranges,
                          const ScoreParams& p);

/// Agreement of two values: 1 for two nulls, 0.5 for exactly one null,
/// otherwise exp(-beta |a - b| / (|a| + |b|)) with 0 vs 0 scoring 1.
double pair_score(const FieldValue& a, const FieldValue& b, double beta);
double pair_score(double a, double b, double beta);

/// Mean pairwise agreement of the three sampled values.
double stability_score(const FieldValue& v1, const FieldValue& v2, const FieldValue& v3,
                       const ScoreParams& p);

/// Majority value (>= 2 equal after normalization); otherwise the median of
/// the present values, or null when nulls are the majority.
FieldValue vote(const FieldValue& v1, const FieldValue& v2, const FieldValue& v3);

/// Plurality category; a tie or no parsed sample gives Unspecified.
DiagnosisCategory vote_category(const std::vector<DiagnosisCategory>& cats);

/// Score contributed by one formula on a record, or nullopt if the formula is
/// not evaluable (a null lhs/operand, or a guarded singularity).
std::optional<double> formula_score(const Formula& f, const CmrRecord& r, double beta);

/// Per-field consistency: mean of the scores of every evaluable formula the
/// field takes part in (as lhs or operand), default_score if none.
std::array<double, kFieldCount> consistency_score(const CmrRecord& r, const std::vector<Formula>& ledger,
                                                  const ScoreParams& p);

class AllInvalidError : public std::runtime_error {
 public:
  AllInvalidError() : std::runtime_error("all sampled outputs failed to parse") {}
};

struct Aggregate {
  CmrRecord record;
  ConfidenceBundle bundle;
};

/// Votes the final record over the samples and scores every field. Samples
/// that failed to parse contribute Null for every field. Throws
/// AllInvalidError if no sample parsed.
Aggregate aggregate(const SampleSet& samples, const ReferenceTable& ranges, const std::vector<Formula>& ledger,
                    const ScoreParams& p);

}  // namespace cmrx
