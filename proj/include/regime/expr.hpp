#pragma once

// Arithmetic expressions over named variables, used for state-dependent
// rates, beta sequences and radial drift profiles in model files.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: exp log sqrt abs sin cos tan tanh min max pow. Constant: pi.

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace regime {

class Expression {
 public:
  /// `variables` are bound by position at evaluation time; `constants` are
  /// folded in. Throws ParseError.
  static Expression compile(const std::string& source, const std::vector<std::string>& variables,
                            const std::map<std::string, double>& constants = {});

  [[nodiscard]] double operator()(const double* values) const;
  [[nodiscard]] double operator()(const std::vector<double>& values) const { return (*this)(values.data()); }
  [[nodiscard]] const std::string& source() const { return source_; }

  struct Node;

 private:
  std::string source_;
  std::shared_ptr<const Node> root_;
};

}  // namespace regime
