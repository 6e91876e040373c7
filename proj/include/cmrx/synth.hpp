#pragma once

// Synthetic corpus: ledger-consistent gold records, two report template
// styles with an exact rule-based re-extractor, and labeled corruptions.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cmrx/eval.hpp"
#include "cmrx/ledger.hpp"
#include "cmrx/record.hpp"

namespace cmrx {

enum class TemplateStyle { Tabular, Narrative };

std::string_view style_name(TemplateStyle s);
std::optional<TemplateStyle> style_from_name(std::string_view s);

struct SynthOptions {
  double null_rate = 0.05;  // per field, applied after derivation
};

/// Samples base quantities from the reference envelopes (mu +/- 2 sigma of a
/// randomly drawn sex, shifted per category) and derives every dependent
/// field through the ledger.
CmrRecord sample_gold(std::uint64_t seed, DiagnosisCategory category,
                      const ReferenceTable& ranges = default_reference_table(),
                      const std::vector<Formula>& ledger = default_ledger(), const SynthOptions& opts = {});

/// Report text with PHI header lines, every present field exactly once, and
/// an impression line naming the category.
std::string render_report(const CmrRecord& record, TemplateStyle style, std::uint64_t seed);

/// Inverse of render_report for both styles (works on scrubbed text too).
CmrRecord rule_extract(std::string_view text);

struct CorruptionPlan {
  double omission = 0;
  double inexact = 0;
  double confusion = 0;
  double fabrication = 0;
  double truncation = 0;
  std::uint64_t seed = 0;

  void validate() const;
  bool is_none() const { return omission == 0 && inexact == 0 && confusion == 0 && fabrication == 0 && truncation == 0; }
};

struct Corruption {
  ParseOutcome pred;
  FieldLabels intended;
};

/// Applies the plan. Each present field draws at most one of omission,
/// inexact, confusion; each null field may draw fabrication; truncation
/// replaces the whole output with a ParseError.
Corruption corrupt(const CmrRecord& gold, const CorruptionPlan& plan);

struct SynthReport {
  std::string report_id;
  std::string text;
  CmrRecord gold;
  TemplateStyle style;
  std::optional<Corruption> corruption;
};

struct CorpusOptions {
  std::size_t n = 100;
  std::vector<TemplateStyle> styles{TemplateStyle::Tabular, TemplateStyle::Narrative};
  std::optional<CorruptionPlan> plan;
  SynthOptions synth;
  std::uint64_t seed = 0;
};

std::vector<SynthReport> generate_corpus(const CorpusOptions& opts, const ReferenceTable& ranges = default_reference_table(),
                                         const std::vector<Formula>& ledger = default_ledger());

/// {report_id, text, gold_record, style, corruption_labels[, corrupted_record]}
nlohmann::ordered_json to_json(const SynthReport& r);
SynthReport synth_report_from_json(const nlohmann::ordered_json& j);

}  // namespace cmrx
