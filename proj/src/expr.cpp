#include "regime/expr.hpp"

#include "regime/core.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>

namespace regime {

struct Expression::Node {
  enum class Kind { Constant, Variable, Negate, Add, Sub, Mul, Div, Pow, Call } kind;
  double value = 0;
  std::size_t slot = 0;
  std::string function;
  std::vector<std::shared_ptr<const Node>> args;

  double eval(const double* v) const {
    switch (kind) {
      case Kind::Constant: return value;
      case Kind::Variable: return v[slot];
      case Kind::Negate: return -args[0]->eval(v);
      case Kind::Add: return args[0]->eval(v) + args[1]->eval(v);
      case Kind::Sub: return args[0]->eval(v) - args[1]->eval(v);
      case Kind::Mul: return args[0]->eval(v) * args[1]->eval(v);
      case Kind::Div: return args[0]->eval(v) / args[1]->eval(v);
      case Kind::Pow: return std::pow(args[0]->eval(v), args[1]->eval(v));
      case Kind::Call: break;
    }
    const double a = args[0]->eval(v);
    if (function == "exp") return std::exp(a);
    if (function == "log") return std::log(a);
    if (function == "sqrt") return std::sqrt(a);
    if (function == "abs") return std::abs(a);
    if (function == "sin") return std::sin(a);
    if (function == "cos") return std::cos(a);
    if (function == "tan") return std::tan(a);
    if (function == "tanh") return std::tanh(a);
    const double b = args[1]->eval(v);
    if (function == "min") return std::min(a, b);
    if (function == "max") return std::max(a, b);
    return std::pow(a, b);
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

int arity(const std::string& f) {
  static const std::map<std::string, int> table{{"exp", 1}, {"log", 1}, {"sqrt", 1}, {"abs", 1},
                                                {"sin", 1}, {"cos", 1}, {"tan", 1},  {"tanh", 1},
                                                {"min", 2}, {"max", 2}, {"pow", 2}};
  const auto it = table.find(f);
  return it == table.end() ? -1 : it->second;
}

NodePtr make(Kind kind, std::vector<NodePtr> args = {}) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = kind;
  n->args = std::move(args);
  return n;
}

NodePtr constant(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = Kind::Constant;
  n->value = v;
  return n;
}

// Constant-folds nodes whose arguments are all constants.
NodePtr fold(NodePtr n) {
  for (const auto& a : n->args) {
    if (a->kind != Kind::Constant) return n;
  }
  if (n->kind == Kind::Constant || n->kind == Kind::Variable) return n;
  return constant(n->eval(nullptr));
}

class Parser {
 public:
  Parser(const std::string& s, const std::vector<std::string>& vars, const std::map<std::string, double>& consts)
      : s_(s), vars_(vars), consts_(consts) {}

  NodePtr parse() {
    auto n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream msg;
    msg << "expression \"" << s_ << "\" at column " << pos_ + 1 << ": " << what;
    throw Error(ErrorCode::ParseError, msg.str());
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = fold(make(Kind::Add, {lhs, term()}));
      } else if (accept('-')) {
        lhs = fold(make(Kind::Sub, {lhs, term()}));
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = fold(make(Kind::Mul, {lhs, unary()}));
      } else if (accept('/')) {
        lhs = fold(make(Kind::Div, {lhs, unary()}));
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return fold(make(Kind::Negate, {unary()}));
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) return fold(make(Kind::Pow, {base, unary()}));
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      auto n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (accept('(')) return call(name);
      for (std::size_t k = 0; k < vars_.size(); ++k) {
        if (vars_[k] == name) {
          auto n = std::make_shared<Expression::Node>();
          n->kind = Kind::Variable;
          n->slot = k;
          return n;
        }
      }
      if (const auto it = consts_.find(name); it != consts_.end()) return constant(it->second);
      if (name == "pi") return constant(std::numbers::pi);
      pos_ = start;
      fail("unknown name '" + name + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr call(const std::string& name) {
    const int n = arity(name);
    if (n < 0) fail("unknown function '" + name + "'");
    std::vector<NodePtr> args{expr()};
    while (accept(',')) args.push_back(expr());
    if (!accept(')')) fail("expected ')'");
    if (static_cast<int>(args.size()) != n) fail(name + " takes " + std::to_string(n) + " argument(s)");
    auto node = std::make_shared<Expression::Node>();
    node->kind = Kind::Call;
    node->function = name;
    node->args = std::move(args);
    return fold(node);
  }

  const std::string& s_;
  const std::vector<std::string>& vars_;
  const std::map<std::string, double>& consts_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::compile(const std::string& source, const std::vector<std::string>& variables,
                               const std::map<std::string, double>& constants) {
  Expression e;
  e.source_ = source;
  e.root_ = Parser(source, variables, constants).parse();
  return e;
}

double Expression::operator()(const double* values) const { return root_->eval(values); }

}  // namespace regime
