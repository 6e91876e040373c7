#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "cmrx/fields.hpp"
#include "cmrx/record.hpp"
#include "helpers.hpp"

using namespace cmrx;

namespace {

// Dictionary order, written out independently of fields.cpp.
const std::vector<std::string> kKeys = {
    "HEIGHT", "WEIGHT", "BSA",     "SBP",     "DBP",    "BHR",    "LVEDV",  "LVESV",   "LVCO",    "LVMASS", "LVSV",
    "LVEF",   "RVEDV",  "RVESV",   "RVCO",    "RVMASS", "RVSV",   "RVEF",   "LVEDVI",  "LVESVI",  "LVCOI",  "LVMASSI",
    "LVSVI",  "RVEDVI", "RVESVI",  "RVCOI",   "RVMASSI", "RVSVI", "LVEDD",  "RVEDD",   "LVESD",   "RVESD",  "LVAWT",
    "LVIWT",  "LAV",    "LAVI",    "LAA2CH",  "LAA4CH", "LAL2CH", "LAL4CH", "RAV",     "RAVI",    "RAA2CH", "RAA4CH",
    "RAL2CH", "RAL4CH", "HCT",     "PRET1M",  "PRET1B", "POSTT1M", "POSTT1B", "ECV"};

std::string object_with(const std::string& lvef_json, const std::string& skip = "") {
  std::string s = "{";
  bool first = true;
  for (const auto& k : kKeys) {
    if (k == skip) continue;
    if (!first) s += ",";
    first = false;
    s += "\"" + k + "\":" + (k == "LVEF" ? lvef_json : std::string("null"));
  }
  return s + "}";
}

}  // namespace

TEST_CASE("dictionary has 52 keys in the documented order and section sizes") {
  REQUIRE(kKeys.size() == 52);
  for (std::size_t i = 0; i < kFieldCount; ++i) CHECK(key_of(field_at(i)) == kKeys[i]);
  std::size_t total = 0;
  for (auto s : {Section::Vitals, Section::LvFunction, Section::RvFunction, Section::IndexedFunction,
                 Section::VentricularStructure, Section::AtrialStructure, Section::Tissue})
    total += section_size(s);
  CHECK(total == 52);
  CHECK(section_size(Section::IndexedFunction) == 10);
  CHECK(section_size(Section::AtrialStructure) == 12);
  for (const auto& spec : field_specs()) CHECK_FALSE(spec.description.empty());
  std::set<std::string_view> uniq;
  for (auto f : all_fields()) uniq.insert(key_of(f));
  CHECK(uniq.size() == 52);
  CHECK(field_from_key("LVEF") == FieldId::LVEF);
  CHECK_FALSE(field_from_key("lvef").has_value());
}

TEST_CASE("field values are finite and non-negative") {
  CHECK_THROWS(FieldValue::present(-1.0));
  CHECK_THROWS(FieldValue::present(NAN));
  CHECK_THROWS(FieldValue::present(INFINITY));
  CHECK(FieldValue::present(0.0).is_present());
  CHECK(FieldValue::null().is_null());
}

TEST_CASE("parse: complete object") {
  auto out = parse_record(object_with("60"));
  REQUIRE(is_record(out));
  const auto& r = std::get<CmrRecord>(out);
  CHECK(r[FieldId::LVEF] == FieldValue::present(60));
  CHECK(r[FieldId::LVEDV].is_null());
  CHECK(r.category == DiagnosisCategory::Unspecified);
}

TEST_CASE("parse: numeric strings and null tokens are accepted") {
  auto out = parse_record(object_with("\"60.5\""));
  REQUIRE(is_record(out));
  CHECK(std::get<CmrRecord>(out)[FieldId::LVEF].value() == 60.5);
  out = parse_record(object_with("\"null\""));
  REQUIRE(is_record(out));
  CHECK(std::get<CmrRecord>(out)[FieldId::LVEF].is_null());
}

TEST_CASE("parse: missing key is a schema violation") {
  auto out = parse_record(object_with("60", "RVEF"));
  REQUIRE_FALSE(is_record(out));
  CHECK(std::get<ParseError>(out).kind == ParseError::Kind::SchemaViolation);
  CHECK(std::get<ParseError>(out).message.find("RVEF") != std::string::npos);
}

TEST_CASE("parse: extra key, wrong types and negatives are schema violations") {
  auto with_extra = object_with("60");
  with_extra.insert(with_extra.size() - 1, ",\"LVXX\":1");
  for (const auto& doc : {with_extra, object_with("\"abc\""), object_with("-5"), object_with("[1]"),
                          object_with("true")}) {
    auto out = parse_record(doc);
    REQUIRE_FALSE(is_record(out));
    CHECK(std::get<ParseError>(out).kind == ParseError::Kind::SchemaViolation);
  }
}

TEST_CASE("parse: truncated text and non-object documents are Invalid") {
  CHECK(std::get<ParseError>(parse_record("[1,2,3]")).kind == ParseError::Kind::Invalid);
  CHECK(std::get<ParseError>(parse_record("42")).kind == ParseError::Kind::Invalid);
  auto out = parse_record("{\"HEIGHT\": 17");
  REQUIRE_FALSE(is_record(out));
  CHECK(std::get<ParseError>(out).kind == ParseError::Kind::Invalid);
  CHECK(std::get<ParseError>(parse_record("")).kind == ParseError::Kind::Invalid);
}

TEST_CASE("parse: CATEGORY") {
  auto doc = object_with("60");
  doc.insert(doc.size() - 1, ",\"CATEGORY\":\"hcm\"");
  auto out = parse_record(doc);
  REQUIRE(is_record(out));
  CHECK(std::get<CmrRecord>(out).category == DiagnosisCategory::HCM);
  doc = object_with("60");
  doc.insert(doc.size() - 1, ",\"CATEGORY\":\"Amyloid\"");
  CHECK_FALSE(is_record(parse_record(doc)));
}

TEST_CASE("serialize: all-null record") {
  std::string expected = "{";
  for (const auto& k : kKeys) expected += "\"" + k + "\":null,";
  expected += "\"CATEGORY\":\"Unspecified\"}";
  CHECK(serialize_record(CmrRecord{}) == expected);
}

TEST_CASE("serialize: equal records give identical bytes") {
  Rng rng(3);
  auto a = testutil::random_record(rng);
  auto b = a;
  CHECK(serialize_record(a) == serialize_record(b));
}

TEST_CASE("round-trip on random records") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    auto r = testutil::random_record(rng);
    auto out = parse_record(serialize_record(r));
    REQUIRE(is_record(out));
    // exact: shortest round-trip formatting loses nothing
    CHECK(std::get<CmrRecord>(out) == r);
  }
}

TEST_CASE("json value round-trip") {
  Rng rng(5);
  auto r = testutil::random_record(rng);
  auto out = record_from_json(record_to_json(r));
  REQUIRE(is_record(out));
  CHECK(std::get<CmrRecord>(out) == r);
}

TEST_CASE("normalize_value") {
  CHECK(normalize_value(FieldId::HCT, "42%").value() == doctest::Approx(0.42).epsilon(1e-12));
  CHECK(normalize_value(FieldId::HCT, "0.42").value() == doctest::Approx(0.42));
  CHECK(normalize_value(FieldId::LVEF, "null").is_null());
  CHECK(normalize_value(FieldId::LVEF, "N/A").is_null());
  CHECK(normalize_value(FieldId::LVEDV, "150 ml").value() == 150);
  CHECK(normalize_value(FieldId::LVEDV, "150 mL").value() == 150);
  CHECK(normalize_value(FieldId::HEIGHT, "1.75 m").value() == doctest::Approx(175));
  CHECK_THROWS_AS(normalize_value(FieldId::LVEDV, "abc"), NormalizeError);
  CHECK_THROWS_AS(normalize_value(FieldId::LVEF, "150%"), NormalizeError);
}

TEST_CASE("approx_equal") {
  CHECK(approx_equal(FieldValue::null(), FieldValue::null(), 1e-9));
  CHECK_FALSE(approx_equal(FieldValue::null(), FieldValue::present(0), 1e-9));
  CHECK(approx_equal(100.0, 100.0 + 1e-8, 1e-9));
  CHECK_FALSE(approx_equal(100.0, 100.001, 1e-9));
  CHECK(approx_equal(0.0, 0.0, 1e-9));
}

TEST_CASE("format_number is shortest round-trip") {
  CHECK(format_number(60) == "60");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");
}
