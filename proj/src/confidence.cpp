#include "cmrx/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cmrx {

void ScoreParams::validate() const {
  if (!(alpha > 0)) throw std::invalid_argument("alpha must be > 0");
  if (!(beta > 0)) throw std::invalid_argument("beta must be > 0");
  if (!(default_score >= 0 && default_score <= 1)) throw std::invalid_argument("default_score must be in [0,1]");
  if (!(review_threshold >= 0 && review_threshold <= 1))
    throw std::invalid_argument("review_threshold must be in [0,1]");
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (!(temperature >= 0)) throw std::invalid_argument("temperature must be >= 0");
}

std::vector<FieldId> ConfidenceBundle::flagged() const {
  std::vector<FieldId> out;
  for (std::size_t i = 0; i < kFieldCount; ++i)
    if (fields[i].flagged) out.push_back(field_at(i));
  return out;
}

double distribution_score(FieldId field, const FieldValue& v, const ReferenceTable& ranges, const ScoreParams& p) {
  if (v.is_null()) return p.default_score;
  bool any = false;
  double best = 0;
  for (Sex sex : {Sex::Male, Sex::Female}) {
    auto row = ranges.find(field, sex);
    if (!row) continue;
    any = true;
    const double z = (v.value() - row->mu) / (p.alpha * row->sigma);
    best = std::max(best, std::exp(-0.5 * z * z));
  }
  return any ? best : p.default_score;
}

double pair_score(double a, double b, double beta) {
  const double denom = std::fabs(a) + std::fabs(b);
  if (denom == 0) return 1.0;
  return std::exp(-beta * std::fabs(a - b) / denom);
}

double pair_score(const FieldValue& a, const FieldValue& b, double beta) {
  if (a.is_null() && b.is_null()) return 1.0;
  if (a.is_null() || b.is_null()) return 0.5;
  return pair_score(a.value(), b.value(), beta);
}

double stability_score(const FieldValue& v1, const FieldValue& v2, const FieldValue& v3, const ScoreParams& p) {
  return (pair_score(v1, v2, p.beta) + pair_score(v1, v3, p.beta) + pair_score(v2, v3, p.beta)) / 3.0;
}

namespace {

double stability_n(const std::vector<FieldValue>& vs, double beta) {
  if (vs.size() < 2) return 1.0;
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      sum += pair_score(vs[i], vs[j], beta);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

FieldValue vote_n(const std::vector<FieldValue>& vs) {
  // Majority: any value (null included) held by more than half the samples,
  // or for three samples, at least two.
  std::size_t nulls = 0;
  std::vector<double> present;
  for (const auto& v : vs) {
    if (v.is_null()) ++nulls;
    else present.push_back(v.value());
  }
  std::sort(present.begin(), present.end());

  const std::size_t need = vs.size() / 2 + 1;
  if (nulls >= need) return FieldValue::null();
  for (std::size_t i = 0; i < present.size();) {
    std::size_t j = i + 1;
    while (j < present.size() && approx_equal(present[i], present[j], kRecordRelTol)) ++j;
    if (j - i >= need) return FieldValue::present(present[i]);
    i = j;
  }
  if (present.empty() || nulls > present.size()) return FieldValue::null();
  return FieldValue::present(present[(present.size() - 1) / 2]);
}

}  // namespace

FieldValue vote(const FieldValue& v1, const FieldValue& v2, const FieldValue& v3) { return vote_n({v1, v2, v3}); }

DiagnosisCategory vote_category(const std::vector<DiagnosisCategory>& cats) {
  std::map<DiagnosisCategory, int> counts;
  for (auto c : cats) ++counts[c];
  DiagnosisCategory best = DiagnosisCategory::Unspecified;
  int best_n = 0;
  bool tie = false;
  for (auto [c, n] : counts) {
    if (n > best_n) {
      best = c;
      best_n = n;
      tie = false;
    } else if (n == best_n) {
      tie = true;
    }
  }
  return tie ? DiagnosisCategory::Unspecified : best;
}

std::optional<double> formula_score(const Formula& f, const CmrRecord& r, double beta) {
  const auto& lhs = r[f.lhs];
  if (lhs.is_null()) return std::nullopt;
  auto rhs = f.evaluate(r);
  if (!rhs) return std::nullopt;
  return pair_score(lhs.value(), *rhs, beta);
}

std::array<double, kFieldCount> consistency_score(const CmrRecord& r, const std::vector<Formula>& ledger,
                                                  const ScoreParams& p) {
  std::array<double, kFieldCount> sum{};
  std::array<int, kFieldCount> count{};
  for (const auto& f : ledger) {
    auto s = formula_score(f, r, p.beta);
    if (!s) continue;
    sum[index_of(f.lhs)] += *s;
    ++count[index_of(f.lhs)];
    for (auto op : f.operands) {
      sum[index_of(op)] += *s;
      ++count[index_of(op)];
    }
  }
  std::array<double, kFieldCount> out{};
  for (std::size_t i = 0; i < kFieldCount; ++i)
    out[i] = count[i] ? sum[i] / count[i] : p.default_score;
  return out;
}

Aggregate aggregate(const SampleSet& samples, const ReferenceTable& ranges, const std::vector<Formula>& ledger,
                    const ScoreParams& p) {
  std::vector<const CmrRecord*> parsed;
  std::vector<DiagnosisCategory> cats;
  for (const auto& a : samples.attempts) {
    if (const auto* rec = std::get_if<CmrRecord>(&a)) {
      parsed.push_back(rec);
      cats.push_back(rec->category);
    } else {
      parsed.push_back(nullptr);
    }
  }
  if (std::none_of(parsed.begin(), parsed.end(), [](auto* r) { return r != nullptr; })) throw AllInvalidError();

  Aggregate out;
  std::array<double, kFieldCount> stab{};
  std::vector<FieldValue> column(parsed.size());
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    for (std::size_t k = 0; k < parsed.size(); ++k)
      column[k] = parsed[k] ? parsed[k]->values[i] : FieldValue::null();
    out.record.values[i] = vote_n(column);
    stab[i] = stability_n(column, p.beta);
  }
  out.record.category = vote_category(cats);

  const auto cons = consistency_score(out.record, ledger, p);
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    auto& s = out.bundle.fields[i];
    s.dist = distribution_score(field_at(i), out.record.values[i], ranges, p);
    s.stab = stab[i];
    s.cons = cons[i];
    s.final = (s.dist + s.stab + s.cons) / 3.0;
    s.flagged = s.final < p.review_threshold;
  }
  return out;
}

}  // namespace cmrx
