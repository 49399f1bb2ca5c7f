#include "openrpf/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "openrpf/errors.hpp"

namespace openrpf {

struct Expression::Node {
  enum Kind { Number, VarX, VarK, Neg, Add, Sub, Mul, Div, Pow, Call } kind = Number;
  double value = 0.0;
  double (*fn)(double) = nullptr;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;

  double eval(double x, double k) const {
    switch (kind) {
      case Number: return value;
      case VarX: return x;
      case VarK: return k;
      case Neg: return -lhs->eval(x, k);
      case Add: return lhs->eval(x, k) + rhs->eval(x, k);
      case Sub: return lhs->eval(x, k) - rhs->eval(x, k);
      case Mul: return lhs->eval(x, k) * rhs->eval(x, k);
      case Div: return lhs->eval(x, k) / rhs->eval(x, k);
      case Pow: return std::pow(lhs->eval(x, k), rhs->eval(x, k));
      case Call: return fn(lhs->eval(x, k));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make(Expression::Node::Kind kind, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

double fabs_(double v) { return std::fabs(v); }
double sin_(double v) { return std::sin(v); }
double cos_(double v) { return std::cos(v); }
double tan_(double v) { return std::tan(v); }
double exp_(double v) { return std::exp(v); }
double log_(double v) { return std::log(v); }
double sqrt_(double v) { return std::sqrt(v); }

// expr   := term (('+'|'-') term)*
// term   := unary (('*'|'/') unary)*
// unary  := '-' unary | power
// power  := atom ('^' unary)?
// atom   := number | x | k | pi | fn '(' expr ')' | '(' expr ')'
class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw ValidationError("expression '" + std::string(s_) + "' at column " +
                          std::to_string(pos_ + 1) + ": " + why);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (eat('+')) {
        n = make(Expression::Node::Add, n, term());
      } else if (eat('-')) {
        n = make(Expression::Node::Sub, n, term());
      } else {
        return n;
      }
    }
  }
  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (eat('*')) {
        n = make(Expression::Node::Mul, n, unary());
      } else if (eat('/')) {
        n = make(Expression::Node::Div, n, unary());
      } else {
        return n;
      }
    }
  }
  NodePtr unary() {
    if (eat('-')) return make(Expression::Node::Neg, unary());
    if (eat('+')) return unary();
    return power();
  }
  NodePtr power() {
    NodePtr base = atom();
    if (eat('^')) return make(Expression::Node::Pow, base, unary());
    return base;
  }
  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr n = expr();
      if (!eat(')')) fail("missing ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const std::string tail(s_.substr(pos_));
      char* end = nullptr;
      const double v = std::strtod(tail.c_str(), &end);
      if (end == tail.c_str()) fail("bad number");
      pos_ += static_cast<std::size_t>(end - tail.c_str());
      auto n = std::make_shared<Expression::Node>();
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string name(s_.substr(start, pos_ - start));
      if (name == "x") return make(Expression::Node::VarX);
      if (name == "k") return make(Expression::Node::VarK);
      if (name == "pi") {
        auto n = std::make_shared<Expression::Node>();
        n->value = M_PI;
        return n;
      }
      double (*fn)(double) = nullptr;
      if (name == "abs") fn = fabs_;
      else if (name == "sin") fn = sin_;
      else if (name == "cos") fn = cos_;
      else if (name == "tan") fn = tan_;
      else if (name == "exp") fn = exp_;
      else if (name == "log") fn = log_;
      else if (name == "sqrt") fn = sqrt_;
      else fail("unknown name '" + name + "'");
      if (!eat('(')) fail("expected '(' after " + name);
      NodePtr arg = expr();
      if (!eat(')')) fail("missing ')'");
      auto n = std::make_shared<Expression::Node>();
      n->kind = Expression::Node::Call;
      n->fn = fn;
      n->lhs = std::move(arg);
      return n;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view source) {
  Expression e;
  e.source_ = std::string(source);
  e.root_ = Parser(e.source_).parse();
  return e;
}

double Expression::operator()(double x, double k) const {
  if (!root_) throw ValidationError("expression: not parsed");
  return root_->eval(x, k);
}

}  // namespace openrpf
