#include "cmrx/eval.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace cmrx {

std::string_view label_name(ErrorLabel l) {
  switch (l) {
    case ErrorLabel::Correct: return "Correct";
    case ErrorLabel::Omission: return "Omission";
    case ErrorLabel::Inexact: return "Inexact";
    case ErrorLabel::Confusion: return "Confusion";
    case ErrorLabel::Invalid: return "Invalid";
    case ErrorLabel::Other: return "Other";
  }
  return "Other";
}

std::optional<ErrorLabel> label_from_name(std::string_view s) {
  for (auto l : kAllLabels)
    if (label_name(l) == s) return l;
  return std::nullopt;
}

ErrorLabel classify_field(const CmrRecord& gold, const ParseOutcome& pred_outcome, FieldId field) {
  const auto* pred = std::get_if<CmrRecord>(&pred_outcome);
  if (!pred) return ErrorLabel::Invalid;

  const auto& g = gold[field];
  const auto& p = (*pred)[field];
  if (approx_equal(g, p, kEqualRelTol)) return ErrorLabel::Correct;
  if (g.is_present() && p.is_null()) return ErrorLabel::Omission;
  // p is present here: either gold is null, or both present and unequal.
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    if (field_at(i) == field) continue;
    const auto& other = gold.values[i];
    if (other.is_present() && approx_equal(other.value(), p.value(), kEqualRelTol)) return ErrorLabel::Confusion;
  }
  if (g.is_present() && std::fabs(p.value() - g.value()) <= kInexactBand * std::fabs(g.value()))
    return ErrorLabel::Inexact;
  return ErrorLabel::Other;
}

FieldLabels classify_record(const CmrRecord& gold, const ParseOutcome& pred) {
  FieldLabels out{};
  for (std::size_t i = 0; i < kFieldCount; ++i) out[i] = classify_field(gold, pred, field_at(i));
  return out;
}

ExtractionMetrics metrics_from_labels(std::span<const FieldLabels> labels) {
  ExtractionMetrics m;
  m.n_reports = labels.size();
  for (auto l : kAllLabels) m.counts[l] = 0;
  std::size_t reports_ok = 0;
  for (const auto& rec : labels) {
    bool all = true;
    for (auto l : rec) {
      ++m.counts[l];
      if (l != ErrorLabel::Correct) all = false;
    }
    if (all) ++reports_ok;
  }
  const std::size_t slots = kFieldCount * labels.size();
  m.total_errors = slots - m.counts[ErrorLabel::Correct];
  if (!labels.empty()) {
    m.variable_accuracy = static_cast<double>(m.counts[ErrorLabel::Correct]) / static_cast<double>(slots);
    m.report_accuracy = static_cast<double>(reports_ok) / static_cast<double>(labels.size());
  }
  return m;
}

ExtractionMetrics extraction_metrics(std::span<const CmrRecord> golds, std::span<const ParseOutcome> preds) {
  if (golds.size() != preds.size()) throw EvalError("gold and prediction lists differ in length");
  std::vector<FieldLabels> labels;
  labels.reserve(golds.size());
  for (std::size_t i = 0; i < golds.size(); ++i) labels.push_back(classify_record(golds[i], preds[i]));
  return metrics_from_labels(labels);
}

ClassificationMetrics classification_metrics(std::span<const DiagnosisCategory> golds,
                                             std::span<const DiagnosisCategory> preds) {
  if (golds.size() != preds.size()) throw EvalError("gold and prediction lists differ in length");
  if (golds.empty()) throw EvalError("classification metrics need at least one report");

  ClassificationMetrics m;
  std::set<DiagnosisCategory> classes;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    ++m.confusion[golds[i]][preds[i]];
    classes.insert(golds[i]);
    classes.insert(preds[i]);
    if (golds[i] == preds[i]) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(golds.size());

  double sp = 0, sr = 0, sf = 0;
  for (auto c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
      if (preds[i] == c && golds[i] == c) ++tp;
      else if (preds[i] == c) ++fp;
      else if (golds[i] == c) ++fn;
    }
    const double p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    sp += p;
    sr += r;
    sf += f;
    m.classes.push_back(c);
  }
  const double k = static_cast<double>(classes.size());
  m.macro_precision = sp / k;
  m.macro_recall = sr / k;
  m.macro_f1 = sf / k;
  return m;
}

Discrimination confidence_discrimination(std::span<const ErrorLabel> labels, std::span<const double> scores,
                                         double threshold) {
  if (labels.size() != scores.size()) throw EvalError("labels and scores differ in length");
  Discrimination d;
  std::size_t err_below = 0, err_above = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool err = labels[i] != ErrorLabel::Correct;
    if (scores[i] < threshold) {
      ++d.n_below;
      err_below += err;
    } else {
      ++d.n_above;
      err_above += err;
    }
  }
  if (d.n_below) d.err_below = static_cast<double>(err_below) / static_cast<double>(d.n_below);
  if (d.n_above) d.err_above = static_cast<double>(err_above) / static_cast<double>(d.n_above);
  return d;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

}  // namespace

std::string format_metrics_table(const std::string& row_name, const ExtractionMetrics& m) {
  auto count = [&m](ErrorLabel l) {
    auto it = m.counts.find(l);
    return it == m.counts.end() ? std::size_t{0} : it->second;
  };
  char buf[512];
  std::ostringstream out;
  std::snprintf(buf, sizeof buf, "%-24s | %14s | %12s | %8s | %8s | %9s | %8s | %6s | %6s\n", "Model", "Variable-Level",
                "Report-Level", "Omission", "Inexact", "Confusion", "Invalid", "Other", "Total");
  out << buf;
  out << std::string(117, '-') << '\n';
  std::snprintf(buf, sizeof buf, "%-24s | %14s | %12s | %8zu | %8zu | %9zu | %8zu | %6zu | %6zu\n", row_name.c_str(),
                pct(m.variable_accuracy).c_str(), pct(m.report_accuracy).c_str(), count(ErrorLabel::Omission),
                count(ErrorLabel::Inexact), count(ErrorLabel::Confusion), count(ErrorLabel::Invalid),
                count(ErrorLabel::Other), m.total_errors);
  out << buf;
  return out.str();
}

std::string format_classification_table(const std::string& row_name, const ClassificationMetrics& m) {
  char buf[256];
  std::ostringstream out;
  std::snprintf(buf, sizeof buf, "%-24s | %8s | %8s | %8s | %8s\n", "Model", "Acc.", "Prec.", "Rec.", "F1");
  out << buf << std::string(68, '-') << '\n';
  std::snprintf(buf, sizeof buf, "%-24s | %8s | %8s | %8s | %8s\n", row_name.c_str(), pct(m.accuracy).c_str(),
                pct(m.macro_precision).c_str(), pct(m.macro_recall).c_str(), pct(m.macro_f1).c_str());
  out << buf;
  return out.str();
}

nlohmann::ordered_json to_json(const ExtractionMetrics& m) {
  nlohmann::ordered_json j;
  j["n_reports"] = m.n_reports;
  j["variable_accuracy"] = m.variable_accuracy;
  j["report_accuracy"] = m.report_accuracy;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (auto l : kAllLabels) {
    auto it = m.counts.find(l);
    counts[std::string(label_name(l))] = it == m.counts.end() ? 0 : it->second;
  }
  j["counts"] = counts;
  j["total_errors"] = m.total_errors;
  return j;
}

nlohmann::ordered_json to_json(const ClassificationMetrics& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["macro_precision"] = m.macro_precision;
  j["macro_recall"] = m.macro_recall;
  j["macro_f1"] = m.macro_f1;
  nlohmann::ordered_json conf = nlohmann::ordered_json::object();
  for (const auto& [g, row] : m.confusion) {
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (const auto& [p, n] : row) r[std::string(category_name(p))] = n;
    conf[std::string(category_name(g))] = r;
  }
  j["confusion"] = conf;
  return j;
}

nlohmann::ordered_json to_json(const Discrimination& d) {
  nlohmann::ordered_json j;
  j["err_below"] = d.err_below ? nlohmann::ordered_json(*d.err_below) : nlohmann::ordered_json(nullptr);
  j["err_above"] = d.err_above ? nlohmann::ordered_json(*d.err_above) : nlohmann::ordered_json(nullptr);
  j["n_below"] = d.n_below;
  j["n_above"] = d.n_above;
  return j;
}

}  // namespace cmrx
