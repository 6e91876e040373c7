#pragma once

// Evaluation against gold records: per-field error taxonomy, variable- and
// report-level accuracy, classification metrics, confidence discrimination.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cmrx/record.hpp"

namespace cmrx {

enum class ErrorLabel { Correct, Omission, Inexact, Confusion, Invalid, Other };

inline constexpr std::array<ErrorLabel, 6> kAllLabels{ErrorLabel::Correct, ErrorLabel::Omission,
                                                      ErrorLabel::Inexact, ErrorLabel::Confusion,
                                                      ErrorLabel::Invalid, ErrorLabel::Other};

std::string_view label_name(ErrorLabel l);
std::optional<ErrorLabel> label_from_name(std::string_view s);

using FieldLabels = std::array<ErrorLabel, kFieldCount>;

inline constexpr double kEqualRelTol = 1e-6;
inline constexpr double kInexactBand = 0.10;

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Labels one field. Precedence: Invalid > Correct > Omission > Confusion >
/// Inexact > Other.
ErrorLabel classify_field(const CmrRecord& gold, const ParseOutcome& pred, FieldId field);
FieldLabels classify_record(const CmrRecord& gold, const ParseOutcome& pred);

struct ExtractionMetrics {
  std::size_t n_reports = 0;
  double variable_accuracy = 0;
  double report_accuracy = 0;
  std::map<ErrorLabel, std::size_t> counts;
  // Omission + Inexact + Confusion + Invalid + Other.
  std::size_t total_errors = 0;
};

/// Throws EvalError on a length mismatch.
ExtractionMetrics extraction_metrics(std::span<const CmrRecord> golds, std::span<const ParseOutcome> preds);
ExtractionMetrics metrics_from_labels(std::span<const FieldLabels> labels);

struct ClassificationMetrics {
  double accuracy = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  // confusion[gold][pred]
  std::map<DiagnosisCategory, std::map<DiagnosisCategory, std::size_t>> confusion;
  std::vector<DiagnosisCategory> classes;  // classes included in the macro mean
};

/// Accuracy plus macro-averaged one-vs-rest precision/recall/F1 over the
/// classes present in gold or predictions. Per-class precision (recall) is 0
/// when the class was never predicted (never in gold). Throws EvalError on a
/// length mismatch or empty input.
ClassificationMetrics classification_metrics(std::span<const DiagnosisCategory> golds,
                                             std::span<const DiagnosisCategory> preds);

struct Discrimination {
  std::optional<double> err_below;  // nullopt: no field under the threshold
  std::optional<double> err_above;
  std::size_t n_below = 0;
  std::size_t n_above = 0;
};

/// Error rate (label != Correct) among scores < threshold and >= threshold.
Discrimination confidence_discrimination(std::span<const ErrorLabel> labels, std::span<const double> scores,
                                         double threshold = 0.7);

/// Table with the columns Variable-Level, Report-Level, Omission, Inexact,
/// Confusion, Invalid, Total, plus Other.
std::string format_metrics_table(const std::string& row_name, const ExtractionMetrics& m);
std::string format_classification_table(const std::string& row_name, const ClassificationMetrics& m);

nlohmann::ordered_json to_json(const ExtractionMetrics& m);
nlohmann::ordered_json to_json(const ClassificationMetrics& m);
nlohmann::ordered_json to_json(const Discrimination& d);

}  // namespace cmrx
