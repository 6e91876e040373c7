#include "cmrx/ledger.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace cmrx {
namespace {

constexpr std::string_view kDefaultLedger = R"(# id | lhs | operands | rhs
F1  | LVSV    | LVEDV, LVESV          | LVEDV - LVESV
F2  | RVSV    | RVEDV, RVESV          | RVEDV - RVESV
F3  | LVEF    | LVSV, LVEDV           | LVSV / LVEDV * 100
F4  | RVEF    | RVSV, RVEDV           | RVSV / RVEDV * 100
F5  | LVCO    | LVSV, BHR             | LVSV * BHR / 1000
F6  | RVCO    | RVSV, BHR             | RVSV * BHR / 1000
F7  | LVEDVI  | LVEDV, BSA            | LVEDV / BSA
F8  | LVESVI  | LVESV, BSA            | LVESV / BSA
F9  | LVSVI   | LVSV, BSA             | LVSV / BSA
F10 | LVCOI   | LVCO, BSA             | LVCO / BSA
F11 | LVMASSI | LVMASS, BSA           | LVMASS / BSA
F12 | RVEDVI  | RVEDV, BSA            | RVEDV / BSA
F13 | RVESVI  | RVESV, BSA            | RVESV / BSA
F14 | RVSVI   | RVSV, BSA             | RVSV / BSA
F15 | RVCOI   | RVCO, BSA             | RVCO / BSA
F16 | RVMASSI | RVMASS, BSA           | RVMASS / BSA
F17 | LAVI    | LAV, BSA              | LAV / BSA
F18 | RAVI    | RAV, BSA              | RAV / BSA
F19 | BSA     | HEIGHT, WEIGHT        | sqrt(HEIGHT * WEIGHT / 3600)
F20 | LAV     | LAA2CH, LAA4CH, LAL2CH, LAL4CH | 0.85 * LAA2CH * LAA4CH / min(LAL2CH, LAL4CH)
F21 | RAV     | RAA2CH, RAA4CH, RAL2CH, RAL4CH | 0.85 * RAA2CH * RAA4CH / min(RAL2CH, RAL4CH)
F22 | ECV     | HCT, POSTT1M, PRET1M, POSTT1B, PRET1B | (1 - HCT) * ((1 / POSTT1M - 1 / PRET1M) / (1 / POSTT1B - 1 / PRET1B)) * 100
)";

// Approximate adult normal values (SSFP volumes/mass at 1.5T, MOLLI T1),
// canonical units. RA two-chamber measurements have no published norms.
constexpr std::string_view kDefaultRanges = R"(field,sex,mu,sigma
HEIGHT,male,176,7
HEIGHT,female,163,7
WEIGHT,male,84,14
WEIGHT,female,70,14
BSA,male,2.0,0.18
BSA,female,1.76,0.17
SBP,male,125,14
SBP,female,118,15
DBP,male,76,9
DBP,female,73,9
BHR,male,68,11
BHR,female,71,11
LVEDV,male,160,29
LVEDV,female,128,22
LVESV,male,58,15
LVESV,female,43,11
LVCO,male,6.6,1.3
LVCO,female,5.8,1.1
LVMASS,male,123,22
LVMASS,female,89,16
LVSV,male,102,18
LVSV,female,85,14
LVEF,male,64,5
LVEF,female,67,5
RVEDV,male,178,32
RVEDV,female,134,25
RVESV,male,76,19
RVESV,female,52,14
RVCO,male,6.6,1.3
RVCO,female,5.8,1.1
RVMASS,male,38,8
RVMASS,female,30,6
RVSV,male,103,20
RVSV,female,82,15
RVEF,male,58,6
RVEF,female,61,6
LVEDVI,male,81,12
LVEDVI,female,74,10
LVESVI,male,29,7
LVESVI,female,25,6
LVCOI,male,3.3,0.6
LVCOI,female,3.3,0.6
LVMASSI,male,62,9
LVMASSI,female,51,7
LVSVI,male,52,8
LVSVI,female,49,7
RVEDVI,male,90,14
RVEDVI,female,78,12
RVESVI,male,38,9
RVESVI,female,30,7
RVCOI,male,3.3,0.6
RVCOI,female,3.3,0.6
RVMASSI,male,19,4
RVMASSI,female,17,3
RVSVI,male,52,9
RVSVI,female,48,8
LVEDD,male,52,4
LVEDD,female,48,4
RVEDD,male,42,5
RVEDD,female,38,5
LVESD,male,35,4
LVESD,female,31,4
RVESD,male,31,5
RVESD,female,28,5
LVAWT,male,9,1.3
LVAWT,female,7.5,1.2
LVIWT,male,7.5,1.2
LVIWT,female,6.5,1.1
LAV,male,72,20
LAV,female,66,18
LAVI,male,36,9
LAVI,female,38,10
LAA2CH,male,21,4
LAA2CH,female,19.5,4
LAA4CH,male,22,4
LAA4CH,female,20,4
LAL2CH,male,5.2,0.6
LAL2CH,female,4.9,0.6
LAL4CH,male,5.6,0.6
LAL4CH,female,5.3,0.6
RAV,male,86,24
RAV,female,68,20
RAVI,male,43,11
RAVI,female,39,10
RAA4CH,male,22,4
RAA4CH,female,19,3.5
RAL4CH,male,5.5,0.6
RAL4CH,female,5.1,0.5
HCT,male,0.44,0.03
HCT,female,0.40,0.03
PRET1M,male,980,40
PRET1M,female,1000,40
PRET1B,male,1580,90
PRET1B,female,1650,90
POSTT1M,male,450,40
POSTT1M,female,440,40
POSTT1B,male,290,40
POSTT1B,female,280,40
ECV,male,25,3
ECV,female,27,3
)";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LedgerError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FieldId require_field(std::string_view key, std::size_t line) {
  auto f = field_from_key(key);
  if (!f) throw LedgerError("line " + std::to_string(line) + ": unknown field '" + std::string(key) + "'");
  return *f;
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw LedgerError("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

template <class F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t lineno = 0, pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    ++lineno;
    if (!line.empty() && line.front() != '#') f(line, lineno);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

}  // namespace

std::optional<double> Formula::evaluate(const CmrRecord& r) const {
  return rhs.eval([&r](FieldId f) -> std::optional<double> {
    const auto& v = r[f];
    if (v.is_null()) return std::nullopt;
    return v.value();
  });
}

std::vector<Formula> parse_ledger(std::string_view text) {
  std::vector<Formula> out;
  std::set<std::string> ids;
  for_each_line(text, [&](std::string_view line, std::size_t lineno) {
    auto cols = split(line, '|');
    if (cols.size() != 4)
      throw LedgerError("line " + std::to_string(lineno) + ": expected 'id | lhs | operands | rhs'");
    Formula f{std::string(cols[0]), require_field(cols[1], lineno), {}, Expr::parse(cols[3])};
    if (!ids.insert(f.id).second) throw LedgerError("duplicate formula id " + f.id);
    for (auto op : split(cols[2], ',')) f.operands.push_back(require_field(op, lineno));

    auto declared = f.operands;
    auto used = f.rhs.variables();
    std::sort(declared.begin(), declared.end());
    std::sort(used.begin(), used.end());
    if (declared != used)
      throw LedgerError(f.id + ": operand list does not match the variables of its expression");
    if (std::find(declared.begin(), declared.end(), f.lhs) != declared.end())
      throw LedgerError(f.id + ": lhs appears among its own operands");
    out.push_back(std::move(f));
  });
  return out;
}

std::vector<Formula> load_ledger(const std::string& path) { return parse_ledger(read_file(path)); }

const std::vector<Formula>& default_ledger() {
  static const std::vector<Formula> ledger = parse_ledger(kDefaultLedger);
  return ledger;
}

std::string_view default_ledger_text() { return kDefaultLedger; }

ReferenceTable::ReferenceTable(std::vector<ReferenceRange> rows) : rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (!(rows_[i].sigma > 0))
      throw LedgerError("reference range for " + std::string(key_of(rows_[i].field)) + " has sigma <= 0");
    auto& slot = index_[index_of(rows_[i].field)][rows_[i].sex == Sex::Male ? 0 : 1];
    if (slot != 0) throw LedgerError("duplicate reference row for " + std::string(key_of(rows_[i].field)));
    slot = i + 1;
  }
}

ReferenceTable ReferenceTable::parse(std::string_view csv) {
  std::vector<ReferenceRange> rows;
  bool header = true;
  for_each_line(csv, [&](std::string_view line, std::size_t lineno) {
    auto cols = split(line, ',');
    if (header) {
      header = false;
      if (cols.size() == 4 && cols[0] == "field") return;
    }
    if (cols.size() != 4) throw LedgerError("line " + std::to_string(lineno) + ": expected field,sex,mu,sigma");
    Sex sex;
    if (cols[1] == "male") sex = Sex::Male;
    else if (cols[1] == "female") sex = Sex::Female;
    else throw LedgerError("line " + std::to_string(lineno) + ": sex must be male or female");
    rows.push_back({require_field(cols[0], lineno), sex, parse_double(cols[2], lineno), parse_double(cols[3], lineno)});
  });
  return ReferenceTable(std::move(rows));
}

ReferenceTable ReferenceTable::load(const std::string& path) { return parse(read_file(path)); }

std::vector<ReferenceRange> ReferenceTable::rows_for(FieldId f) const {
  std::vector<ReferenceRange> out;
  for (const auto& r : rows_)
    if (r.field == f) out.push_back(r);
  return out;
}

std::optional<ReferenceRange> ReferenceTable::find(FieldId f, Sex s) const {
  const auto slot = index_[index_of(f)][s == Sex::Male ? 0 : 1];
  if (slot == 0) return std::nullopt;
  return rows_[slot - 1];
}

const ReferenceTable& default_reference_table() {
  static const ReferenceTable table = ReferenceTable::parse(kDefaultRanges);
  return table;
}

std::string_view default_reference_csv() { return kDefaultRanges; }

}  // namespace cmrx
