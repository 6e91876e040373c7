#include "cmrx/synth.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cmrx/rng.hpp"

namespace cmrx {

using F = FieldId;

std::string_view style_name(TemplateStyle s) {
  return s == TemplateStyle::Tabular ? "tabular" : "narrative";
}

std::optional<TemplateStyle> style_from_name(std::string_view s) {
  if (s == "tabular") return TemplateStyle::Tabular;
  if (s == "narrative") return TemplateStyle::Narrative;
  return std::nullopt;
}

void CorruptionPlan::validate() const {
  for (double r : {omission, inexact, confusion, fabrication, truncation})
    if (!(r >= 0 && r <= 1)) throw std::invalid_argument("corruption rates must lie in [0,1]");
  if (omission + inexact + confusion > 1)
    throw std::invalid_argument("omission + inexact + confusion rates must not exceed 1");
}

namespace {

double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

struct BaseField {
  FieldId field;
  int decimals;
};

// Independently sampled quantities; everything else is derived.
constexpr BaseField kBaseFields[] = {
    {F::HEIGHT, 1}, {F::WEIGHT, 1}, {F::SBP, 0},    {F::DBP, 0},     {F::BHR, 0},
    {F::LVEDV, 1},  {F::RVEDV, 1},  {F::LVMASS, 1}, {F::RVMASS, 1},  {F::LVEDD, 1},
    {F::RVEDD, 1},  {F::LVAWT, 1},  {F::LVIWT, 1},  {F::LAA2CH, 1},  {F::LAA4CH, 1},
    {F::LAL2CH, 1}, {F::LAL4CH, 1}, {F::RAA4CH, 1}, {F::RAL4CH, 1},  {F::HCT, 2},
    {F::PRET1M, 0}, {F::PRET1B, 0}, {F::POSTT1M, 0}, {F::POSTT1B, 0},
};

// Multiplicative shift of a base quantity for a diagnostic category.
double category_scale(DiagnosisCategory c, FieldId f) {
  switch (c) {
    case DiagnosisCategory::HCM:
      if (f == F::LVMASS) return 1.6;
      if (f == F::LVAWT) return 1.8;
      if (f == F::LVIWT) return 1.3;
      if (f == F::LAA2CH || f == F::LAA4CH) return 1.2;
      break;
    case DiagnosisCategory::DCM:
      if (f == F::LVEDV) return 1.5;
      if (f == F::LVEDD) return 1.25;
      if (f == F::LVMASS) return 1.2;
      break;
    case DiagnosisCategory::CAD:
      if (f == F::LVEDV) return 1.1;
      break;
    case DiagnosisCategory::Ebstein:
      if (f == F::RVEDV) return 1.6;
      if (f == F::RAA4CH) return 1.8;
      if (f == F::RAL4CH) return 1.3;
      break;
    case DiagnosisCategory::PAH:
      if (f == F::RVEDV) return 1.3;
      if (f == F::RVMASS) return 1.8;
      if (f == F::RAA4CH) return 1.3;
      break;
    default: break;
  }
  return 1.0;
}

// Additive shift of the sampled ejection fractions (percentage points).
std::pair<double, double> ef_shift(DiagnosisCategory c) {
  switch (c) {
    case DiagnosisCategory::DCM: return {-25, -5};
    case DiagnosisCategory::CAD: return {-10, 0};
    case DiagnosisCategory::HCM: return {5, 0};
    case DiagnosisCategory::Ebstein: return {0, -8};
    case DiagnosisCategory::PAH: return {0, -15};
    default: return {0, 0};
  }
}

std::optional<ReferenceRange> envelope_row(const ReferenceTable& ranges, FieldId f, Sex sex) {
  if (auto r = ranges.find(f, sex)) return r;
  return ranges.find(f, sex == Sex::Male ? Sex::Female : Sex::Male);
}

double sample_envelope(Rng& rng, const ReferenceTable& ranges, FieldId f, Sex sex) {
  auto row = envelope_row(ranges, f, sex);
  if (!row) throw LedgerError("no sampling envelope for " + std::string(key_of(f)));
  return rng.uniform(row->mu - 2 * row->sigma, row->mu + 2 * row->sigma);
}

}  // namespace

CmrRecord sample_gold(std::uint64_t seed, DiagnosisCategory category, const ReferenceTable& ranges,
                      const std::vector<Formula>& ledger, const SynthOptions& opts) {
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(category)));
  const Sex sex = rng.chance(0.5) ? Sex::Male : Sex::Female;

  CmrRecord r;
  r.category = category;
  for (const auto& b : kBaseFields) {
    const double v = sample_envelope(rng, ranges, b.field, sex) * category_scale(category, b.field);
    r[b.field] = FieldValue::present(round_to(std::max(v, 0.0), b.decimals));
  }
  // RA two-chamber views have no published envelope; scale the 4CH view.
  r[F::RAA2CH] = FieldValue::present(round_to(r[F::RAA4CH].value() * rng.uniform(0.85, 1.05), 1));
  r[F::RAL2CH] = FieldValue::present(round_to(r[F::RAL4CH].value() * rng.uniform(0.9, 1.05), 1));
  // End-systolic diameters as a fraction of end-diastolic ones.
  const double lv_ratio = category == DiagnosisCategory::DCM ? 0.8 : 0.66;
  r[F::LVESD] = FieldValue::present(round_to(r[F::LVEDD].value() * rng.uniform(lv_ratio - 0.06, lv_ratio + 0.06), 1));
  r[F::RVESD] = FieldValue::present(round_to(r[F::RVEDD].value() * rng.uniform(0.65, 0.8), 1));

  // Ejection fractions fix the end-systolic volumes; the ledger then
  // recomputes stroke volume and EF exactly.
  const auto [lv_shift, rv_shift] = ef_shift(category);
  const double lvef = std::clamp(sample_envelope(rng, ranges, F::LVEF, sex) + lv_shift, 15.0, 80.0);
  const double rvef = std::clamp(sample_envelope(rng, ranges, F::RVEF, sex) + rv_shift, 15.0, 80.0);
  r[F::LVESV] = FieldValue::present(round_to(r[F::LVEDV].value() * (1 - lvef / 100), 1));
  r[F::RVESV] = FieldValue::present(round_to(r[F::RVEDV].value() * (1 - rvef / 100), 1));

  // Fixpoint over the ledger: fill each null lhs once its operands exist.
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& f : ledger) {
      if (r[f.lhs].is_present()) continue;
      auto v = f.evaluate(r);
      if (v && *v >= 0) {
        r[f.lhs] = FieldValue::present(*v);
        changed = true;
      }
    }
  }

  for (auto& v : r.values)
    if (rng.chance(opts.null_rate)) v = FieldValue::null();
  return r;
}

namespace {

std::string display_name(FieldId f) {
  if (f == F::HCT) return "Hematocrit";
  return std::string(spec_of(f).description);
}

std::string unit_suffix(FieldId f) {
  const auto u = spec_of(f).unit;
  if (u == "fraction") return "";
  if (u == "%") return "%";
  return " " + std::string(u);
}

std::string lower_first(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

constexpr std::string_view kSectionTitles[] = {
    "Vital signs", "Left ventricle", "Right ventricle", "Indexed function",
    "Ventricular dimensions", "Atria", "Tissue characterization"};

std::string_view impression_phrase(DiagnosisCategory c) {
  switch (c) {
    case DiagnosisCategory::CAD: return "coronary artery disease";
    case DiagnosisCategory::HCM: return "hypertrophic cardiomyopathy";
    case DiagnosisCategory::DCM: return "dilated cardiomyopathy";
    case DiagnosisCategory::Ebstein: return "Ebstein's anomaly";
    case DiagnosisCategory::PAH: return "pulmonary arterial hypertension";
    default: return "";
  }
}

// Narrative phrase bank; "{}" placeholders are label, key, value+unit.
std::string narrative_sentence(std::size_t variant, FieldId f, const std::string& value) {
  const auto name = display_name(f);
  const auto key = std::string(key_of(f));
  switch (variant % 4) {
    case 0: return "The " + lower_first(name) + " (" + key + ") measures " + value + ".";
    case 1: return name + " (" + key + ") was " + value + ".";
    case 2: return "A " + lower_first(name) + " (" + key + ") of " + value + " was recorded.";
    default: return name + " (" + key + ") is " + value + ".";
  }
}

}  // namespace

std::string render_report(const CmrRecord& record, TemplateStyle style, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5eed));
  std::ostringstream out;
  char buf[128];

  out << "CARDIAC MAGNETIC RESONANCE REPORT\n";
  std::snprintf(buf, sizeof buf, "Patient Name: SYNTHETIC^PATIENT%04llu\n",
                static_cast<unsigned long long>(rng.below(10000)));
  out << buf;
  std::snprintf(buf, sizeof buf, "MRN: %08llu\n", static_cast<unsigned long long>(rng.below(100000000)));
  out << buf;
  std::snprintf(buf, sizeof buf, "DOB: %04llu-%02llu-%02llu\n", static_cast<unsigned long long>(1930 + rng.below(70)),
                static_cast<unsigned long long>(1 + rng.below(12)), static_cast<unsigned long long>(1 + rng.below(28)));
  out << buf;
  std::snprintf(buf, sizeof buf, "Exam Date: %04llu-%02llu-%02llu\n", static_cast<unsigned long long>(2015 + rng.below(10)),
                static_cast<unsigned long long>(1 + rng.below(12)), static_cast<unsigned long long>(1 + rng.below(28)));
  out << buf;
  out << "Referring Physician: Dr. A. Example\n";
  out << "Technologist: R. Tech\n\n";
  out << "INDICATION: Assessment of cardiac structure and function.\n\n";

  const auto& specs = field_specs();
  if (style == TemplateStyle::Tabular) {
    out << "MEASUREMENTS\n";
    Section current = specs.front().section;
    bool header_written = false;
    for (const auto& s : specs) {
      if (s.section != current) {
        current = s.section;
        header_written = false;
      }
      const auto& v = record[s.id];
      if (v.is_null()) continue;
      if (!header_written) {
        out << "\n" << kSectionTitles[static_cast<int>(current)] << "\n";
        header_written = true;
      }
      out << "  " << display_name(s.id) << " (" << s.key << "): " << format_number(v.value()) << unit_suffix(s.id)
          << "\n";
    }
  } else {
    out << "FINDINGS\n";
    for (int sec = 0; sec < 7; ++sec) {
      std::string paragraph;
      for (const auto& s : specs) {
        if (static_cast<int>(s.section) != sec) continue;
        const auto& v = record[s.id];
        if (v.is_null()) continue;
        if (!paragraph.empty()) paragraph += ' ';
        paragraph += narrative_sentence(rng.below(4), s.id, format_number(v.value()) + unit_suffix(s.id));
      }
      if (!paragraph.empty()) out << "\n" << paragraph << "\n";
    }
  }

  out << "\nIMPRESSION: ";
  if (record.category == DiagnosisCategory::Unspecified)
    out << "No specific diagnostic category assigned.\n";
  else
    out << "Findings consistent with " << impression_phrase(record.category) << ".\n";
  return out.str();
}

CmrRecord rule_extract(std::string_view text) {
  static constexpr std::string_view kConnectors[] = {": ", " measures ", " was ", " of ", " is "};
  CmrRecord r;
  std::size_t pos = 0;
  while ((pos = text.find('(', pos)) != std::string_view::npos) {
    const auto close = text.find(')', pos);
    if (close == std::string_view::npos) break;
    const auto key = text.substr(pos + 1, close - pos - 1);
    pos = close;
    auto field = field_from_key(key);
    if (!field) continue;
    auto rest = text.substr(close + 1);
    for (auto c : kConnectors) {
      if (rest.substr(0, c.size()) != c) continue;
      rest.remove_prefix(c.size());
      double v = 0;
      auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
      if (ec == std::errc{} && std::isfinite(v) && v >= 0) r[*field] = FieldValue::present(v);
      break;
    }
  }

  const auto imp = text.rfind("IMPRESSION:");
  if (imp != std::string_view::npos) {
    auto line = text.substr(imp);
    line = line.substr(0, line.find('\n'));
    for (auto c : kNamedCategories)
      if (line.find(impression_phrase(c)) != std::string_view::npos) r.category = c;
  }
  return r;
}

namespace {

bool collides(const CmrRecord& gold, double v, FieldId except) {
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    if (field_at(i) == except) continue;
    const auto& g = gold.values[i];
    if (g.is_present() && approx_equal(g.value(), v, kEqualRelTol)) return true;
  }
  return false;
}

}  // namespace

Corruption corrupt(const CmrRecord& gold, const CorruptionPlan& plan) {
  plan.validate();
  Rng rng(plan.seed);
  Corruption out;
  out.intended.fill(ErrorLabel::Correct);

  if (rng.chance(plan.truncation)) {
    out.pred = ParseError{ParseError::Kind::Invalid, "truncated output"};
    out.intended.fill(ErrorLabel::Invalid);
    return out;
  }

  CmrRecord pred = gold;
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    const FieldId f = field_at(i);
    const auto& g = gold.values[i];
    const double u = rng.uniform();
    if (g.is_present()) {
      if (u < plan.omission) {
        pred.values[i] = FieldValue::null();
        out.intended[i] = ErrorLabel::Omission;
      } else if (u < plan.omission + plan.inexact) {
        // Relative error in [1%, 9.5%]: inside the Inexact band, far from
        // the equality tolerance.
        for (int attempt = 0; attempt < 16; ++attempt) {
          const double mag = rng.uniform(0.01, 0.095);
          const double v = g.value() * (rng.chance(0.5) ? 1 + mag : 1 - mag);
          if (collides(gold, v, f)) continue;
          pred.values[i] = FieldValue::present(v);
          out.intended[i] = ErrorLabel::Inexact;
          break;
        }
      } else if (u < plan.omission + plan.inexact + plan.confusion) {
        std::vector<std::size_t> donors;
        for (std::size_t j = 0; j < kFieldCount; ++j)
          if (j != i && gold.values[j].is_present() && !approx_equal(gold.values[j].value(), g.value(), kEqualRelTol))
            donors.push_back(j);
        if (!donors.empty()) {
          pred.values[i] = gold.values[donors[rng.below(donors.size())]];
          out.intended[i] = ErrorLabel::Confusion;
        }
      }
    } else if (u < plan.fabrication) {
      const auto row = envelope_row(default_reference_table(), f, Sex::Male);
      for (int attempt = 0; attempt < 16; ++attempt) {
        const double v = row ? std::max(0.0, rng.uniform(row->mu - 2 * row->sigma, row->mu + 2 * row->sigma))
                             : rng.uniform(1, 100);
        if (collides(gold, v, f)) continue;
        pred.values[i] = FieldValue::present(v);
        out.intended[i] = ErrorLabel::Other;
        break;
      }
    }
  }
  out.pred = pred;
  return out;
}

std::vector<SynthReport> generate_corpus(const CorpusOptions& opts, const ReferenceTable& ranges,
                                         const std::vector<Formula>& ledger) {
  if (opts.styles.empty()) throw std::invalid_argument("at least one template style is required");
  if (opts.plan) opts.plan->validate();
  std::vector<SynthReport> out;
  out.reserve(opts.n);
  for (std::size_t i = 0; i < opts.n; ++i) {
    const std::uint64_t seed = mix_seed(opts.seed, i);
    Rng pick(seed);
    const auto category = kNamedCategories[pick.below(kNamedCategories.size())];
    SynthReport rep;
    char id[64];
    std::snprintf(id, sizeof id, "synth-%llu-%06zu", static_cast<unsigned long long>(opts.seed), i);
    rep.report_id = id;
    rep.gold = sample_gold(seed, category, ranges, ledger, opts.synth);
    rep.style = opts.styles[i % opts.styles.size()];
    rep.text = render_report(rep.gold, rep.style, seed);
    if (opts.plan) {
      auto plan = *opts.plan;
      plan.seed = mix_seed(opts.plan->seed, i);
      rep.corruption = corrupt(rep.gold, plan);
    }
    out.push_back(std::move(rep));
  }
  return out;
}

nlohmann::ordered_json to_json(const SynthReport& r) {
  nlohmann::ordered_json j;
  j["report_id"] = r.report_id;
  j["text"] = r.text;
  j["gold_record"] = record_to_json(r.gold);
  j["style"] = style_name(r.style);
  if (r.corruption) {
    nlohmann::ordered_json labels = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < kFieldCount; ++i)
      labels[std::string(key_of(field_at(i)))] = label_name(r.corruption->intended[i]);
    j["corruption_labels"] = labels;
    if (const auto* rec = std::get_if<CmrRecord>(&r.corruption->pred))
      j["corrupted_record"] = record_to_json(*rec);
    else
      j["corrupted_record"] = nullptr;
  } else {
    j["corruption_labels"] = nullptr;
  }
  return j;
}

SynthReport synth_report_from_json(const nlohmann::ordered_json& j) {
  SynthReport r;
  r.report_id = j.at("report_id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  auto gold = record_from_json(j.at("gold_record"));
  if (!is_record(gold)) throw std::invalid_argument(r.report_id + ": gold_record is not a valid record");
  r.gold = std::get<CmrRecord>(gold);
  auto style = style_from_name(j.value("style", "tabular"));
  if (!style) throw std::invalid_argument(r.report_id + ": unknown style");
  r.style = *style;
  if (j.contains("corruption_labels") && !j["corruption_labels"].is_null()) {
    Corruption c;
    for (std::size_t i = 0; i < kFieldCount; ++i) {
      auto l = label_from_name(j["corruption_labels"].at(std::string(key_of(field_at(i)))).get<std::string>());
      if (!l) throw std::invalid_argument(r.report_id + ": unknown corruption label");
      c.intended[i] = *l;
    }
    const auto& cr = j.at("corrupted_record");
    c.pred = cr.is_null() ? ParseOutcome{ParseError{ParseError::Kind::Invalid, "truncated output"}} : record_from_json(cr);
    r.corruption = std::move(c);
  }
  return r;
}

}  // namespace cmrx
