#pragma once

// Tiny arithmetic-expression language used by the formula ledger.
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/' | '×' | '÷') unary)*
//   unary  := '-' unary | primary
//   primary:= number | IDENT | '(' expr ')' | ('sqrt' | '√') '(' expr ')'
//           | 'min' '(' expr ',' expr ')' | 'max' '(' expr ',' expr ')'
//
// Identifiers are field keys. Evaluation yields nullopt on division by zero,
// a negative square root, or a non-finite intermediate.

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cmrx/fields.hpp"

namespace cmrx {

class ExprError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Expr {
 public:
  struct Node;

  static Expr parse(std::string_view text);

  using Lookup = std::function<std::optional<double>(FieldId)>;
  std::optional<double> eval(const Lookup& lookup) const;

  /// Fields referenced, in first-appearance order, without duplicates.
  const std::vector<FieldId>& variables() const { return vars_; }
  const std::string& source() const { return source_; }

 private:
  std::shared_ptr<const Node> root_;
  std::vector<FieldId> vars_;
  std::string source_;
};

}  // namespace cmrx
