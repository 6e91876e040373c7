#pragma once

// Consistency ledger: physiologic identities relating report fields, plus the
// per-sex reference ranges used for distribution scoring.

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cmrx/expr.hpp"
#include "cmrx/fields.hpp"
#include "cmrx/record.hpp"

namespace cmrx {

class LedgerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Formula {
  std::string id;  // "F1".."F22"
  FieldId lhs;
  std::vector<FieldId> operands;
  Expr rhs;

  /// Computed right-hand side, or nullopt when an operand is Null or the
  /// expression hits a guarded singularity.
  std::optional<double> evaluate(const CmrRecord& r) const;
};

/// Ledger text format, one formula per line, '#' comments:
///   F3 | LVEF | LVSV, LVEDV | LVSV / LVEDV * 100
std::vector<Formula> parse_ledger(std::string_view text);
std::vector<Formula> load_ledger(const std::string& path);

/// The built-in 22-formula ledger.
const std::vector<Formula>& default_ledger();
std::string_view default_ledger_text();

enum class Sex { Male, Female };

struct ReferenceRange {
  FieldId field;
  Sex sex;
  double mu;
  double sigma;  // > 0
};

class ReferenceTable {
 public:
  ReferenceTable() = default;
  explicit ReferenceTable(std::vector<ReferenceRange> rows);

  /// CSV with header "field,sex,mu,sigma"; '#' comments allowed.
  static ReferenceTable parse(std::string_view csv);
  static ReferenceTable load(const std::string& path);

  /// Rows for a field (zero, one or two).
  std::vector<ReferenceRange> rows_for(FieldId f) const;
  std::optional<ReferenceRange> find(FieldId f, Sex s) const;
  const std::vector<ReferenceRange>& rows() const { return rows_; }

 private:
  std::vector<ReferenceRange> rows_;
  // [field][sex] -> position in rows_ + 1 (0 = absent)
  std::array<std::array<std::size_t, 2>, kFieldCount> index_{};
};

const ReferenceTable& default_reference_table();
std::string_view default_reference_csv();

}  // namespace cmrx
