#include "cmrx/triage.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>

#include "cmrx/gateway.hpp"

namespace cmrx {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string_view status_name(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::Pending: return "pending";
    case ReviewStatus::Accepted: return "accepted";
    case ReviewStatus::Corrected: return "corrected";
  }
  return "pending";
}

std::optional<ReviewStatus> status_from_name(std::string_view s) {
  for (auto st : {ReviewStatus::Pending, ReviewStatus::Accepted, ReviewStatus::Corrected})
    if (status_name(st) == s) return st;
  return std::nullopt;
}

namespace {

constexpr const char* kReports = "reports.ndjson";
constexpr const char* kQueue = "queue.ndjson";
constexpr const char* kDecisions = "decisions.ndjson";

ojson value_json(const FieldValue& v) { return v.is_null() ? ojson(nullptr) : ojson(v.value()); }

FieldValue value_from_json(const ojson& j) {
  if (j.is_null()) return FieldValue::null();
  return FieldValue::present(j.get<double>());
}

CmrRecord record_or_throw(const ojson& j, const std::string& what) {
  auto r = record_from_json(j);
  if (!is_record(r)) throw StorageError(what + ": stored record is invalid: " + std::get<ParseError>(r).message);
  return std::get<CmrRecord>(r);
}

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string item_id_for(const std::string& report_id, std::optional<FieldId> f) {
  return report_id + ":" + (f ? std::string(key_of(*f)) : std::string("*"));
}

void atomic_write(const fs::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot open '" + tmp + "' for writing");
    out << content;
    out.flush();
    if (!out) throw StorageError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw StorageError("rename to '" + path.string() + "' failed: " + ec.message());
}

template <class F>
void read_ndjson(const fs::path& path, F&& f) {
  if (!fs::exists(path)) return;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto j = ojson::parse(line, nullptr, false);
    if (j.is_discarded()) throw StorageError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON");
    try {
      f(j);
    } catch (const nlohmann::json::exception& e) {
      throw StorageError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::size_t field_rank(const ReviewItem& it) { return it.field ? index_of(*it.field) : kFieldCount; }

bool queue_order(const ReviewItem& a, const ReviewItem& b) {
  if (a.confidence != b.confidence) return a.confidence < b.confidence;
  if (a.report_id != b.report_id) return a.report_id < b.report_id;
  return field_rank(a) < field_rank(b);
}

}  // namespace

ojson bundle_to_json(const ConfidenceBundle& b) {
  ojson j = ojson::object();
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    const auto& s = b.fields[i];
    j[std::string(key_of(field_at(i)))] = {
        {"dist", s.dist}, {"stab", s.stab}, {"cons", s.cons}, {"final", s.final}, {"flagged", s.flagged}};
  }
  return j;
}

ConfidenceBundle bundle_from_json(const ojson& j) {
  ConfidenceBundle b;
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    const auto& s = j.at(std::string(key_of(field_at(i))));
    b.fields[i] = {s.at("dist").get<double>(), s.at("stab").get<double>(), s.at("cons").get<double>(),
                   s.at("final").get<double>(), s.at("flagged").get<bool>()};
  }
  return b;
}

namespace {

ojson report_json(const StoredReport& r) {
  ojson j;
  j["report_id"] = r.report_id;
  j["text"] = r.text;
  j["extracted"] = r.extracted ? record_to_json(*r.extracted) : ojson(nullptr);
  j["record"] = record_to_json(r.record);
  j["scores"] = r.bundle ? bundle_to_json(*r.bundle) : ojson(nullptr);
  return j;
}

}  // namespace

ojson to_json(const ReviewItem& it) {
  ojson j;
  j["item_id"] = it.item_id;
  j["report_id"] = it.report_id;
  j["field"] = it.field ? ojson(std::string(key_of(*it.field))) : ojson(nullptr);
  j["extracted"] = value_json(it.extracted);
  j["confidence"] = it.confidence;
  j["score_breakdown"] = {{"dist", it.dist}, {"stab", it.stab}, {"cons", it.cons}};
  j["status"] = status_name(it.status);
  j["report_excerpt"] = it.report_excerpt;
  return j;
}

ojson to_json(const ReviewDecision& d) {
  ojson j;
  j["item_id"] = d.item_id;
  j["verdict"] = d.verdict == ReviewDecision::Verdict::Accept ? "accept" : "correct";
  if (d.new_record) j["new_value"] = record_to_json(*d.new_record);
  else j["new_value"] = value_json(d.new_value);
  j["reviewer"] = d.reviewer;
  j["timestamp"] = d.timestamp;
  return j;
}

namespace {

ReviewItem item_from_json(const ojson& j) {
  ReviewItem it;
  it.item_id = j.at("item_id").get<std::string>();
  it.report_id = j.at("report_id").get<std::string>();
  if (!j.at("field").is_null()) {
    auto f = field_from_key(j.at("field").get<std::string>());
    if (!f) throw StorageError("unknown field in queue item " + it.item_id);
    it.field = *f;
  }
  it.extracted = value_from_json(j.at("extracted"));
  it.confidence = j.at("confidence").get<double>();
  const auto& sb = j.at("score_breakdown");
  it.dist = sb.at("dist").get<double>();
  it.stab = sb.at("stab").get<double>();
  it.cons = sb.at("cons").get<double>();
  auto st = status_from_name(j.at("status").get<std::string>());
  if (!st) throw StorageError("unknown status in queue item " + it.item_id);
  it.status = *st;
  it.report_excerpt = j.at("report_excerpt").get<std::string>();
  return it;
}

ReviewDecision decision_from_json(const ojson& j) {
  ReviewDecision d;
  d.item_id = j.at("item_id").get<std::string>();
  const auto verdict = j.at("verdict").get<std::string>();
  if (verdict == "accept") d.verdict = ReviewDecision::Verdict::Accept;
  else if (verdict == "correct") d.verdict = ReviewDecision::Verdict::Correct;
  else throw StorageError("unknown verdict '" + verdict + "'");
  const auto& nv = j.at("new_value");
  if (nv.is_object()) d.new_record = record_or_throw(nv, d.item_id);
  else d.new_value = value_from_json(nv);
  d.reviewer = j.value("reviewer", "");
  d.timestamp = j.value("timestamp", "");
  return d;
}

}  // namespace

TriageStore::TriageStore(fs::path data_dir) : dir_(std::move(data_dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw StorageError("cannot create '" + dir_.string() + "': " + ec.message());
  load();
}

void TriageStore::load() {
  read_ndjson(dir_ / kReports, [this](const ojson& j) {
    StoredReport r;
    r.report_id = j.at("report_id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    if (!j.at("extracted").is_null()) r.extracted = record_or_throw(j.at("extracted"), r.report_id);
    r.record = record_or_throw(j.at("record"), r.report_id);
    if (!j.at("scores").is_null()) r.bundle = bundle_from_json(j.at("scores"));
    reports_[r.report_id] = std::move(r);
  });
  read_ndjson(dir_ / kQueue, [this](const ojson& j) {
    auto it = item_from_json(j);
    items_[it.item_id] = std::move(it);
  });
  read_ndjson(dir_ / kDecisions, [this](const ojson& j) { log_.push_back(decision_from_json(j)); });
}

void TriageStore::persist() const {
  std::string reports, queue, decisions;
  for (const auto& [_, r] : reports_) reports += report_json(r).dump() + "\n";
  for (const auto& [_, it] : items_) queue += to_json(it).dump() + "\n";
  for (const auto& d : log_) decisions += to_json(d).dump() + "\n";
  atomic_write(dir_ / kReports, reports);
  atomic_write(dir_ / kQueue, queue);
  atomic_write(dir_ / kDecisions, decisions);
}

std::vector<ReviewItem> TriageStore::enqueue(const CmrRecord& record, const ConfidenceBundle& bundle,
                                             const std::string& report_id, const std::string& report_text) {
  std::unique_lock lock(mu_);
  std::vector<ReviewItem> out;
  if (!reports_.count(report_id)) {
    reports_[report_id] = StoredReport{report_id, report_text, record, record, bundle};
    for (std::size_t i = 0; i < kFieldCount; ++i) {
      const auto& s = bundle.fields[i];
      if (!s.flagged) continue;
      ReviewItem it;
      it.field = field_at(i);
      it.item_id = item_id_for(report_id, it.field);
      it.report_id = report_id;
      it.extracted = record.values[i];
      it.confidence = s.final;
      it.dist = s.dist;
      it.stab = s.stab;
      it.cons = s.cons;
      it.report_excerpt = report_text;
      items_[it.item_id] = it;
    }
    persist();
  }
  for (const auto& [_, it] : items_)
    if (it.report_id == report_id) out.push_back(it);
  std::sort(out.begin(), out.end(), queue_order);
  return out;
}

std::vector<ReviewItem> TriageStore::enqueue_invalid(const std::string& report_id, const std::string& report_text) {
  std::unique_lock lock(mu_);
  if (!reports_.count(report_id)) {
    reports_[report_id] = StoredReport{report_id, report_text, std::nullopt, CmrRecord{}, std::nullopt};
    ReviewItem it;
    it.item_id = item_id_for(report_id, std::nullopt);
    it.report_id = report_id;
    it.report_excerpt = report_text;
    items_[it.item_id] = it;
    persist();
  }
  std::vector<ReviewItem> out;
  for (const auto& [_, it] : items_)
    if (it.report_id == report_id) out.push_back(it);
  return out;
}

CmrRecord TriageStore::apply_decision(ReviewDecision d) {
  std::unique_lock lock(mu_);
  if (d.timestamp.empty()) d.timestamp = now_iso8601();
  auto rec = apply_locked(d, /*log=*/true);
  persist();
  return rec;
}

CmrRecord TriageStore::apply_locked(const ReviewDecision& d, bool log) {
  auto it = items_.find(d.item_id);
  if (it == items_.end()) throw TriageError(TriageError::Kind::NotFound, "no review item '" + d.item_id + "'");
  auto& item = it->second;
  if (item.status != ReviewStatus::Pending)
    throw TriageError(TriageError::Kind::AlreadyDecided, "item '" + d.item_id + "' was already decided");
  auto rep = reports_.find(item.report_id);
  if (rep == reports_.end())
    throw TriageError(TriageError::Kind::NotFound, "no report '" + item.report_id + "' for item " + d.item_id);

  const bool accept = d.verdict == ReviewDecision::Verdict::Accept;
  if (item.field) {
    if (d.new_record) throw TriageError(TriageError::Kind::InvalidValue, "field items take a single value");
    if (!accept) {
      const auto& b = spec_of(*item.field).value_bounds;
      if (d.new_value.is_present() && b && (d.new_value.value() < b->min || d.new_value.value() > b->max))
        throw TriageError(TriageError::Kind::InvalidValue,
                          std::string(key_of(*item.field)) + " correction outside sanity bounds");
      rep->second.record[*item.field] = d.new_value;
    }
  } else {
    if (!accept && !d.new_record)
      throw TriageError(TriageError::Kind::InvalidValue, "whole-report corrections need a full record");
    rep->second.record = accept ? CmrRecord{} : *d.new_record;
  }
  item.status = accept ? ReviewStatus::Accepted : ReviewStatus::Corrected;
  if (log) log_.push_back(d);
  return rep->second.record;
}

std::vector<ReviewItem> TriageStore::queue(std::optional<ReviewStatus> status) const {
  std::shared_lock lock(mu_);
  std::vector<ReviewItem> out;
  for (const auto& [_, it] : items_)
    if (!status || it.status == *status) out.push_back(it);
  std::sort(out.begin(), out.end(), queue_order);
  return out;
}

std::optional<ReviewItem> TriageStore::item(const std::string& item_id) const {
  std::shared_lock lock(mu_);
  auto it = items_.find(item_id);
  if (it == items_.end()) return std::nullopt;
  return it->second;
}

std::optional<StoredReport> TriageStore::report(const std::string& report_id) const {
  std::shared_lock lock(mu_);
  auto it = reports_.find(report_id);
  if (it == reports_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> TriageStore::report_ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : reports_) out.push_back(id);
  return out;
}

std::vector<ReviewDecision> TriageStore::decisions() const {
  std::shared_lock lock(mu_);
  return log_;
}

std::map<ReviewStatus, std::size_t> TriageStore::status_counts() const {
  std::shared_lock lock(mu_);
  std::map<ReviewStatus, std::size_t> out{
      {ReviewStatus::Pending, 0}, {ReviewStatus::Accepted, 0}, {ReviewStatus::Corrected, 0}};
  for (const auto& [_, it] : items_) ++out[it.status];
  return out;
}

std::string TriageStore::export_corpus(CorpusFilter filter) const {
  std::shared_lock lock(mu_);
  std::map<std::string, std::pair<bool, bool>> state;  // report -> (has items, has pending)
  for (const auto& [_, it] : items_) {
    auto& s = state[it.report_id];
    s.first = true;
    if (it.status == ReviewStatus::Pending) s.second = true;
  }
  std::string out;
  for (const auto& [id, r] : reports_) {  // std::map: sorted by report_id
    const auto s = state[id];
    if (s.second) continue;
    if (filter == CorpusFilter::CleanOnly && s.first) continue;
    ojson j;
    j["report_id"] = id;
    j["prompt"] = build_prompt(r.text);
    j["target"] = serialize_record(r.record);
    j["review_state"] = s.first ? "reviewed" : "clean";
    out += j.dump() + "\n";
  }
  return out;
}

void TriageStore::export_corpus_to(const fs::path& path, CorpusFilter filter) const {
  atomic_write(path, export_corpus(filter));
}

void TriageStore::rebuild_from_log() {
  std::unique_lock lock(mu_);
  for (auto& [_, r] : reports_) r.record = r.extracted ? *r.extracted : CmrRecord{};
  for (auto& [_, it] : items_) it.status = ReviewStatus::Pending;
  for (const auto& d : log_) apply_locked(d, /*log=*/false);
  persist();
}

}  // namespace cmrx
