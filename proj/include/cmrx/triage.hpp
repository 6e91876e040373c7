#pragma once

// Review queue and corpus store. Layout under data_dir:
//   reports.ndjson    one line per report: scrubbed text, extracted and current record, scores
//   queue.ndjson      one line per review item
//   decisions.ndjson  append-only decision log (replayable)
// Every file is rewritten via write-to-temp + atomic rename.

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmrx/confidence.hpp"
#include "cmrx/record.hpp"

namespace cmrx {

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TriageError : public std::runtime_error {
 public:
  enum class Kind { NotFound, AlreadyDecided, InvalidValue };
  TriageError(Kind k, const std::string& what) : std::runtime_error(what), kind_(k) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class ReviewStatus { Pending, Accepted, Corrected };
std::string_view status_name(ReviewStatus s);
std::optional<ReviewStatus> status_from_name(std::string_view s);

struct ReviewItem {
  std::string item_id;  // "<report_id>:<FIELD>" or "<report_id>:*" for a whole report
  std::string report_id;
  std::optional<FieldId> field;  // nullopt: the whole output was unparseable
  FieldValue extracted;
  double confidence = 0;
  double dist = 0, stab = 0, cons = 0;
  ReviewStatus status = ReviewStatus::Pending;
  std::string report_excerpt;
};

struct ReviewDecision {
  enum class Verdict { Accept, Correct };
  std::string item_id;
  Verdict verdict = Verdict::Accept;
  FieldValue new_value;                 // field items
  std::optional<CmrRecord> new_record;  // whole-report items
  std::string reviewer;
  std::string timestamp;  // ISO-8601 UTC; filled in when empty
};

struct StoredReport {
  std::string report_id;
  std::string text;  // scrubbed
  std::optional<CmrRecord> extracted;  // nullopt when every sample failed to parse
  CmrRecord record;                    // extracted + applied decisions
  std::optional<ConfidenceBundle> bundle;
};

enum class CorpusFilter { CleanOnly, AllReviewed };

class TriageStore {
 public:
  /// Opens (creating if needed) a store rooted at data_dir.
  explicit TriageStore(std::filesystem::path data_dir);

  /// Stores the report and enqueues one pending item per flagged field,
  /// returned in ascending confidence order. Re-enqueueing a known report is
  /// a no-op that returns its existing items.
  std::vector<ReviewItem> enqueue(const CmrRecord& record, const ConfidenceBundle& bundle,
                                  const std::string& report_id, const std::string& report_text);

  /// Stores a report whose samples all failed to parse, with one item
  /// covering the whole report.
  std::vector<ReviewItem> enqueue_invalid(const std::string& report_id, const std::string& report_text);

  CmrRecord apply_decision(ReviewDecision d);

  /// Items ordered by confidence, ties by (report_id, field order).
  std::vector<ReviewItem> queue(std::optional<ReviewStatus> status = ReviewStatus::Pending) const;
  std::optional<ReviewItem> item(const std::string& item_id) const;
  std::optional<StoredReport> report(const std::string& report_id) const;
  std::vector<std::string> report_ids() const;
  std::vector<ReviewDecision> decisions() const;
  std::map<ReviewStatus, std::size_t> status_counts() const;

  /// ndjson of {report_id, prompt, target, review_state}, sorted by report_id,
  /// excluding reports with pending items.
  std::string export_corpus(CorpusFilter filter = CorpusFilter::AllReviewed) const;
  void export_corpus_to(const std::filesystem::path& path, CorpusFilter filter = CorpusFilter::AllReviewed) const;

  /// Resets every record to its extracted state and every item to pending,
  /// then replays the decision log in order.
  void rebuild_from_log();

  const std::filesystem::path& data_dir() const { return dir_; }

 private:
  void load();
  void persist() const;
  CmrRecord apply_locked(const ReviewDecision& d, bool log);

  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, StoredReport> reports_;
  std::map<std::string, ReviewItem> items_;
  std::vector<ReviewDecision> log_;
};

nlohmann::ordered_json to_json(const ReviewItem& item);
nlohmann::ordered_json to_json(const ReviewDecision& d);
nlohmann::ordered_json bundle_to_json(const ConfidenceBundle& b);
ConfidenceBundle bundle_from_json(const nlohmann::ordered_json& j);

}  // namespace cmrx
