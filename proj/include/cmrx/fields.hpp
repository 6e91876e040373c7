#pragma once

// The 52-field CMR value dictionary: identifiers, sections, canonical units
// and prompt descriptions.

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace cmrx {

enum class FieldId : std::size_t {
  // vitals
  HEIGHT, WEIGHT, BSA, SBP, DBP, BHR,
  // left ventricular function
  LVEDV, LVESV, LVCO, LVMASS, LVSV, LVEF,
  // right ventricular function
  RVEDV, RVESV, RVCO, RVMASS, RVSV, RVEF,
  // BSA-indexed function
  LVEDVI, LVESVI, LVCOI, LVMASSI, LVSVI,
  RVEDVI, RVESVI, RVCOI, RVMASSI, RVSVI,
  // ventricular structure
  LVEDD, RVEDD, LVESD, RVESD, LVAWT, LVIWT,
  // atrial structure
  LAV, LAVI, LAA2CH, LAA4CH, LAL2CH, LAL4CH,
  RAV, RAVI, RAA2CH, RAA4CH, RAL2CH, RAL4CH,
  // tissue characteristics
  HCT, PRET1M, PRET1B, POSTT1M, POSTT1B, ECV,
};

inline constexpr std::size_t kFieldCount = 52;

enum class Section {
  Vitals,
  LvFunction,
  RvFunction,
  IndexedFunction,
  VentricularStructure,
  AtrialStructure,
  Tissue,
};

struct Bounds {
  double min;
  double max;
};

struct FieldSpec {
  FieldId id;
  std::string_view key;  // wire name, e.g. "LVEDV"
  Section section;
  std::string_view unit;
  std::string_view description;
  // Hard sanity bounds applied at parse time only; never used for scoring.
  std::optional<Bounds> value_bounds;
};

/// All 52 specs in dictionary (= serialization) order.
const std::array<FieldSpec, kFieldCount>& field_specs();

const FieldSpec& spec_of(FieldId id);
std::string_view key_of(FieldId id);
std::optional<FieldId> field_from_key(std::string_view key);

constexpr std::size_t index_of(FieldId id) { return static_cast<std::size_t>(id); }
constexpr FieldId field_at(std::size_t i) { return static_cast<FieldId>(i); }

std::string_view section_name(Section s);
std::size_t section_size(Section s);

/// Iterable range over every FieldId in dictionary order.
constexpr std::array<FieldId, kFieldCount> all_fields() {
  std::array<FieldId, kFieldCount> out{};
  for (std::size_t i = 0; i < kFieldCount; ++i) out[i] = field_at(i);
  return out;
}

}  // namespace cmrx
