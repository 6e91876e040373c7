#include "cmrx/record.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include <json.hpp>

namespace cmrx {

using json = nlohmann::json;

FieldValue FieldValue::present(double v) {
  if (!std::isfinite(v) || v < 0)
    throw std::invalid_argument("field values must be finite and non-negative");
  FieldValue out;
  out.v_ = v;
  return out;
}

bool approx_equal(double a, double b, double rel_tol) {
  if (a == b) return true;
  return std::fabs(a - b) <= rel_tol * std::max(std::fabs(a), std::fabs(b));
}

bool approx_equal(const FieldValue& a, const FieldValue& b, double rel_tol) {
  if (a.is_null() || b.is_null()) return a.is_null() && b.is_null();
  return approx_equal(a.value(), b.value(), rel_tol);
}

bool records_equal(const CmrRecord& a, const CmrRecord& b, double rel_tol) {
  if (a.category != b.category) return false;
  for (std::size_t i = 0; i < kFieldCount; ++i)
    if (!approx_equal(a.values[i], b.values[i], rel_tol)) return false;
  return true;
}

std::string_view category_name(DiagnosisCategory c) {
  switch (c) {
    case DiagnosisCategory::Unspecified: return "Unspecified";
    case DiagnosisCategory::CAD: return "CAD";
    case DiagnosisCategory::HCM: return "HCM";
    case DiagnosisCategory::DCM: return "DCM";
    case DiagnosisCategory::Ebstein: return "Ebstein";
    case DiagnosisCategory::PAH: return "PAH";
  }
  return "Unspecified";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Parses a complete decimal number; rejects partial consumption.
std::optional<double> parse_full_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

ParseError schema(std::string msg) { return {ParseError::Kind::SchemaViolation, std::move(msg)}; }

}  // namespace

std::optional<DiagnosisCategory> category_from_name(std::string_view name) {
  const auto l = lower(trim(name));
  if (l == "unspecified" || l.empty()) return DiagnosisCategory::Unspecified;
  for (auto c : kNamedCategories)
    if (lower(category_name(c)) == l) return c;
  return std::nullopt;
}

ParseOutcome parse_record(std::string_view doc) {
  json j = json::parse(doc.begin(), doc.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return ParseError{ParseError::Kind::Invalid, "not well-formed JSON"};
  if (!j.is_object()) return ParseError{ParseError::Kind::Invalid, "top-level value is not an object"};

  CmrRecord rec;
  std::set<std::string> seen;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& val = it.value();
    if (key == "CATEGORY") {
      if (val.is_null()) continue;
      if (!val.is_string()) return schema("CATEGORY must be a string");
      auto cat = category_from_name(val.get<std::string>());
      if (!cat) return schema("unknown CATEGORY '" + val.get<std::string>() + "'");
      rec.category = *cat;
      continue;
    }
    auto field = field_from_key(key);
    if (!field) return schema("unexpected key '" + key + "'");
    seen.insert(key);

    if (val.is_null()) continue;
    double v = 0;
    if (val.is_number()) {
      v = val.get<double>();
    } else if (val.is_string()) {
      const auto s = val.get<std::string>();
      if (lower(trim(s)) == "null") continue;
      auto n = parse_full_number(s);
      if (!n) return schema("non-numeric value for " + key);
      v = *n;
    } else {
      return schema("non-numeric value for " + key);
    }
    if (!std::isfinite(v)) return schema("non-finite value for " + key);
    if (v < 0) return schema("negative value for " + key);
    rec[*field] = FieldValue::present(v);
  }
  if (seen.size() != kFieldCount) {
    for (const auto& s : field_specs())
      if (!seen.count(std::string(s.key))) return schema("missing key '" + std::string(s.key) + "'");
  }
  return rec;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

std::string serialize_record(const CmrRecord& r) {
  std::string out;
  out.reserve(1024);
  out += '{';
  for (const auto& spec : field_specs()) {
    out += '"';
    out += spec.key;
    out += "\":";
    const auto& v = r[spec.id];
    out += v.is_null() ? std::string("null") : format_number(v.value());
    out += ',';
  }
  out += "\"CATEGORY\":\"";
  out += category_name(r.category);
  out += "\"}";
  return out;
}

nlohmann::ordered_json record_to_json(const CmrRecord& r) {
  return nlohmann::ordered_json::parse(serialize_record(r));
}

ParseOutcome record_from_json(const nlohmann::ordered_json& j) { return parse_record(j.dump()); }

namespace {

struct UnitRule {
  std::string_view canonical;  // canonical unit (as in the dictionary)
  std::string_view alias;      // lower-case spelling found in reports
  double factor;               // multiply raw value by this
};

// Spellings are compared after lower-casing and removing spaces.
constexpr UnitRule kUnitRules[] = {
    {"mL", "ml", 1}, {"mL", "cc", 1}, {"mL", "l", 1000},
    {"mL/m²", "ml/m²", 1}, {"mL/m²", "ml/m2", 1}, {"mL/m²", "ml/m^2", 1},
    {"L/min", "l/min", 1}, {"L/min", "ml/min", 0.001},
    {"L/min/m²", "l/min/m²", 1}, {"L/min/m²", "l/min/m2", 1}, {"L/min/m²", "l/min/m^2", 1},
    {"g", "g", 1}, {"g", "gm", 1}, {"g", "grams", 1},
    {"g/m²", "g/m²", 1}, {"g/m²", "g/m2", 1}, {"g/m²", "g/m^2", 1},
    {"mm", "mm", 1}, {"mm", "cm", 10},
    {"cm", "cm", 1}, {"cm", "mm", 0.1}, {"cm", "m", 100},
    {"cm²", "cm²", 1}, {"cm²", "cm2", 1}, {"cm²", "cm^2", 1}, {"cm²", "mm²", 0.01}, {"cm²", "mm2", 0.01},
    {"ms", "ms", 1}, {"ms", "msec", 1},
    {"bpm", "bpm", 1}, {"bpm", "/min", 1}, {"bpm", "beats/min", 1},
    {"mmHg", "mmhg", 1},
    {"kg", "kg", 1}, {"kg", "lb", 0.45359237}, {"kg", "lbs", 0.45359237},
    {"m²", "m²", 1}, {"m²", "m2", 1}, {"m²", "m^2", 1},
    {"%", "%", 1},
};

}  // namespace

FieldValue normalize_value(FieldId field, std::string_view raw) {
  const auto& spec = spec_of(field);
  auto token = trim(raw);
  const auto l = lower(token);
  if (l.empty() || l == "null" || l == "--" || l == "-" || l == "n/a" || l == "na" || l == "none")
    return FieldValue::null();

  // Leading number.
  std::size_t i = 0;
  if (i < token.size() && token[i] == '+') ++i;
  const std::size_t num_begin = i;
  while (i < token.size() && (std::isdigit(static_cast<unsigned char>(token[i])) || token[i] == '.')) ++i;
  if (i < token.size() && (token[i] == 'e' || token[i] == 'E') && i + 1 < token.size() &&
      (std::isdigit(static_cast<unsigned char>(token[i + 1])) || token[i + 1] == '-' || token[i + 1] == '+')) {
    i += 2;
    while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]))) ++i;
  }
  auto number = parse_full_number(token.substr(num_begin, i - num_begin));
  if (!number) throw NormalizeError("not a number: '" + std::string(raw) + "'");
  double v = *number;

  std::string unit;
  for (char c : lower(token.substr(i)))
    if (!std::isspace(static_cast<unsigned char>(c))) unit += c;
  if (!unit.empty() && (std::isdigit(static_cast<unsigned char>(unit.front())) || unit.front() == '.'))
    throw NormalizeError("trailing garbage in '" + std::string(raw) + "'");

  if (field == FieldId::HCT) {
    if (unit == "%" || v > 1) v /= 100.0;
    else if (!unit.empty()) throw NormalizeError("unknown hematocrit unit '" + unit + "'");
  } else if (!unit.empty()) {
    bool matched = false;
    for (const auto& rule : kUnitRules) {
      if (rule.canonical == spec.unit && rule.alias == unit) {
        v *= rule.factor;
        matched = true;
        break;
      }
    }
    if (!matched) throw NormalizeError("unit '" + unit + "' not valid for " + std::string(spec.key));
  }

  if (spec.value_bounds && (v < spec.value_bounds->min || v > spec.value_bounds->max))
    throw NormalizeError(std::string(spec.key) + " value " + format_number(v) + " outside sanity bounds");
  return FieldValue::present(v);
}

}  // namespace cmrx
