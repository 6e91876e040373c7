#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "cmrx/fields.hpp"

namespace cmrx {

/// A field value: a finite non-negative number in the field's canonical unit,
/// or null. Null is an ordinary value ("not present in the report").
class FieldValue {
 public:
  FieldValue() = default;
  static FieldValue null() { return {}; }
  static FieldValue present(double v);

  bool is_null() const { return !v_.has_value(); }
  bool is_present() const { return v_.has_value(); }
  double value() const { return *v_; }
  const std::optional<double>& raw() const { return v_; }

  // Exact comparison; use approx_equal for tolerance-based checks.
  friend bool operator==(const FieldValue&, const FieldValue&) = default;

 private:
  std::optional<double> v_;
};

/// Relative-tolerance equality; two nulls are equal, null vs present is not.
bool approx_equal(const FieldValue& a, const FieldValue& b, double rel_tol);
bool approx_equal(double a, double b, double rel_tol);

enum class DiagnosisCategory { Unspecified, CAD, HCM, DCM, Ebstein, PAH };

inline constexpr std::array<DiagnosisCategory, 5> kNamedCategories{
    DiagnosisCategory::CAD, DiagnosisCategory::HCM, DiagnosisCategory::DCM,
    DiagnosisCategory::Ebstein, DiagnosisCategory::PAH};

std::string_view category_name(DiagnosisCategory c);
std::optional<DiagnosisCategory> category_from_name(std::string_view name);

struct CmrRecord {
  std::array<FieldValue, kFieldCount> values{};
  DiagnosisCategory category = DiagnosisCategory::Unspecified;

  FieldValue& operator[](FieldId f) { return values[index_of(f)]; }
  const FieldValue& operator[](FieldId f) const { return values[index_of(f)]; }

  friend bool operator==(const CmrRecord&, const CmrRecord&) = default;
};

/// Record equality used for comparisons after normalization (rel. tol. 1e-9).
inline constexpr double kRecordRelTol = 1e-9;
bool records_equal(const CmrRecord& a, const CmrRecord& b, double rel_tol = kRecordRelTol);

struct ParseError {
  enum class Kind { Invalid, SchemaViolation };
  Kind kind;
  std::string message;
};

using ParseOutcome = std::variant<CmrRecord, ParseError>;

inline bool is_record(const ParseOutcome& o) { return std::holds_alternative<CmrRecord>(o); }

/// Parses candidate model output. Requires a JSON object with all 52 keys,
/// each numeric, numeric string, or null; CATEGORY optional; nothing else.
ParseOutcome parse_record(std::string_view doc);

/// Canonical JSON: 52 keys in dictionary order, CATEGORY last, no whitespace.
std::string serialize_record(const CmrRecord& r);

class NormalizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Turns a token captured from report text ("150 ml", "42%", "--") into a
/// canonical FieldValue. Throws NormalizeError for non-numeric garbage or
/// values outside the field's sanity bounds.
FieldValue normalize_value(FieldId field, std::string_view raw);

/// The canonical record as a JSON value (keys in dictionary order).
nlohmann::ordered_json record_to_json(const CmrRecord& r);
/// Validates a JSON value with the same rules as parse_record.
ParseOutcome record_from_json(const nlohmann::ordered_json& j);

/// Shortest decimal text that reads back to exactly the same double.
std::string format_number(double v);

}  // namespace cmrx
