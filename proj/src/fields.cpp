#include "cmrx/fields.hpp"

#include <stdexcept>

namespace cmrx {
namespace {

using S = Section;
using F = FieldId;

constexpr Bounds kVolume{0, 1000};
constexpr Bounds kVolumeIdx{0, 600};
constexpr Bounds kOutput{0, 40};
constexpr Bounds kOutputIdx{0, 20};
constexpr Bounds kMass{0, 800};
constexpr Bounds kMassIdx{0, 400};
constexpr Bounds kPercent{0, 100};
constexpr Bounds kDiameter{0, 150};
constexpr Bounds kWall{0, 60};
constexpr Bounds kArea{0, 150};
constexpr Bounds kLength{0, 20};
constexpr Bounds kT1{0, 4000};

constexpr std::array<FieldSpec, kFieldCount> kSpecs{{
    {F::HEIGHT, "HEIGHT", S::Vitals, "cm", "Patient height", Bounds{30, 260}},
    {F::WEIGHT, "WEIGHT", S::Vitals, "kg", "Patient body weight", Bounds{1, 400}},
    {F::BSA, "BSA", S::Vitals, "m²", "Body surface area", Bounds{0.1, 4}},
    {F::SBP, "SBP", S::Vitals, "mmHg", "Systolic blood pressure", Bounds{20, 300}},
    {F::DBP, "DBP", S::Vitals, "mmHg", "Diastolic blood pressure", Bounds{10, 200}},
    {F::BHR, "BHR", S::Vitals, "bpm", "Baseline heart rate during the scan", Bounds{10, 300}},

    {F::LVEDV, "LVEDV", S::LvFunction, "mL", "Left ventricular end-diastolic volume", kVolume},
    {F::LVESV, "LVESV", S::LvFunction, "mL", "Left ventricular end-systolic volume", kVolume},
    {F::LVCO, "LVCO", S::LvFunction, "L/min", "Left ventricular cardiac output", kOutput},
    {F::LVMASS, "LVMASS", S::LvFunction, "g", "Left ventricular total myocardial mass", kMass},
    {F::LVSV, "LVSV", S::LvFunction, "mL", "Left ventricular stroke volume", kVolume},
    {F::LVEF, "LVEF", S::LvFunction, "%", "Left ventricular ejection fraction", kPercent},

    {F::RVEDV, "RVEDV", S::RvFunction, "mL", "Right ventricular end-diastolic volume", kVolume},
    {F::RVESV, "RVESV", S::RvFunction, "mL", "Right ventricular end-systolic volume", kVolume},
    {F::RVCO, "RVCO", S::RvFunction, "L/min", "Right ventricular cardiac output", kOutput},
    {F::RVMASS, "RVMASS", S::RvFunction, "g", "Right ventricular total myocardial mass", kMass},
    {F::RVSV, "RVSV", S::RvFunction, "mL", "Right ventricular stroke volume", kVolume},
    {F::RVEF, "RVEF", S::RvFunction, "%", "Right ventricular ejection fraction", kPercent},

    {F::LVEDVI, "LVEDVI", S::IndexedFunction, "mL/m²", "Left ventricular end-diastolic volume indexed to BSA", kVolumeIdx},
    {F::LVESVI, "LVESVI", S::IndexedFunction, "mL/m²", "Left ventricular end-systolic volume indexed to BSA", kVolumeIdx},
    {F::LVCOI, "LVCOI", S::IndexedFunction, "L/min/m²", "Left ventricular cardiac index (cardiac output indexed to BSA)", kOutputIdx},
    {F::LVMASSI, "LVMASSI", S::IndexedFunction, "g/m²", "Left ventricular mass indexed to BSA", kMassIdx},
    {F::LVSVI, "LVSVI", S::IndexedFunction, "mL/m²", "Left ventricular stroke volume indexed to BSA", kVolumeIdx},
    {F::RVEDVI, "RVEDVI", S::IndexedFunction, "mL/m²", "Right ventricular end-diastolic volume indexed to BSA", kVolumeIdx},
    {F::RVESVI, "RVESVI", S::IndexedFunction, "mL/m²", "Right ventricular end-systolic volume indexed to BSA", kVolumeIdx},
    {F::RVCOI, "RVCOI", S::IndexedFunction, "L/min/m²", "Right ventricular cardiac index (cardiac output indexed to BSA)", kOutputIdx},
    {F::RVMASSI, "RVMASSI", S::IndexedFunction, "g/m²", "Right ventricular mass indexed to BSA", kMassIdx},
    {F::RVSVI, "RVSVI", S::IndexedFunction, "mL/m²", "Right ventricular stroke volume indexed to BSA", kVolumeIdx},

    {F::LVEDD, "LVEDD", S::VentricularStructure, "mm", "Left ventricular end-diastolic diameter", kDiameter},
    {F::RVEDD, "RVEDD", S::VentricularStructure, "mm", "Right ventricular end-diastolic diameter", kDiameter},
    {F::LVESD, "LVESD", S::VentricularStructure, "mm", "Left ventricular end-systolic diameter", kDiameter},
    {F::RVESD, "RVESD", S::VentricularStructure, "mm", "Right ventricular end-systolic diameter", kDiameter},
    {F::LVAWT, "LVAWT", S::VentricularStructure, "mm", "Left ventricular anteroseptal wall thickness", kWall},
    {F::LVIWT, "LVIWT", S::VentricularStructure, "mm", "Left ventricular inferolateral wall thickness", kWall},

    {F::LAV, "LAV", S::AtrialStructure, "mL", "Left atrial volume", kVolume},
    {F::LAVI, "LAVI", S::AtrialStructure, "mL/m²", "Left atrial volume indexed to BSA", kVolumeIdx},
    {F::LAA2CH, "LAA2CH", S::AtrialStructure, "cm²", "Left atrial area in the two-chamber view", kArea},
    {F::LAA4CH, "LAA4CH", S::AtrialStructure, "cm²", "Left atrial area in the four-chamber view", kArea},
    {F::LAL2CH, "LAL2CH", S::AtrialStructure, "cm", "Left atrial length in the two-chamber view", kLength},
    {F::LAL4CH, "LAL4CH", S::AtrialStructure, "cm", "Left atrial length in the four-chamber view", kLength},
    {F::RAV, "RAV", S::AtrialStructure, "mL", "Right atrial volume", kVolume},
    {F::RAVI, "RAVI", S::AtrialStructure, "mL/m²", "Right atrial volume indexed to BSA", kVolumeIdx},
    {F::RAA2CH, "RAA2CH", S::AtrialStructure, "cm²", "Right atrial area in the two-chamber view", kArea},
    {F::RAA4CH, "RAA4CH", S::AtrialStructure, "cm²", "Right atrial area in the four-chamber view", kArea},
    {F::RAL2CH, "RAL2CH", S::AtrialStructure, "cm", "Right atrial length in the two-chamber view", kLength},
    {F::RAL4CH, "RAL4CH", S::AtrialStructure, "cm", "Right atrial length in the four-chamber view", kLength},

    {F::HCT, "HCT", S::Tissue, "fraction", "Hematocrit as a fraction between 0 and 1", Bounds{0, 1}},
    {F::PRET1M, "PRET1M", S::Tissue, "ms", "Pre-contrast (native) T1 of the myocardium", kT1},
    {F::PRET1B, "PRET1B", S::Tissue, "ms", "Pre-contrast (native) T1 of the blood pool", kT1},
    {F::POSTT1M, "POSTT1M", S::Tissue, "ms", "Post-contrast T1 of the myocardium", kT1},
    {F::POSTT1B, "POSTT1B", S::Tissue, "ms", "Post-contrast T1 of the blood pool", kT1},
    {F::ECV, "ECV", S::Tissue, "%", "Myocardial extracellular volume fraction", kPercent},
}};

constexpr bool dictionary_is_ordered() {
  for (std::size_t i = 0; i < kSpecs.size(); ++i)
    if (index_of(kSpecs[i].id) != i) return false;
  return true;
}
static_assert(dictionary_is_ordered(), "field dictionary must follow FieldId order");

}  // namespace

const std::array<FieldSpec, kFieldCount>& field_specs() { return kSpecs; }

const FieldSpec& spec_of(FieldId id) { return kSpecs[index_of(id)]; }

std::string_view key_of(FieldId id) { return kSpecs[index_of(id)].key; }

std::optional<FieldId> field_from_key(std::string_view key) {
  for (const auto& s : kSpecs)
    if (s.key == key) return s.id;
  return std::nullopt;
}

std::string_view section_name(Section s) {
  switch (s) {
    case Section::Vitals: return "vitals";
    case Section::LvFunction: return "lv_function";
    case Section::RvFunction: return "rv_function";
    case Section::IndexedFunction: return "indexed_function";
    case Section::VentricularStructure: return "ventricular_structure";
    case Section::AtrialStructure: return "atrial_structure";
    case Section::Tissue: return "tissue";
  }
  throw std::logic_error("unknown section");
}

std::size_t section_size(Section s) {
  std::size_t n = 0;
  for (const auto& spec : kSpecs)
    if (spec.section == s) ++n;
  return n;
}

}  // namespace cmrx
