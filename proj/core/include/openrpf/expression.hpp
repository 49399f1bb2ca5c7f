#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace openrpf {

// Arithmetic over the variables x and k with + - * / ^, unary minus,
// parentheses and sin cos tan exp log sqrt abs. Parsed once, evaluated often.
class Expression {
 public:
  struct Node;

  Expression() = default;
  static Expression parse(std::string_view source);  // throws ValidationError

  double operator()(double x, double k = 0.0) const;
  const std::string& source() const { return source_; }
  bool valid() const { return root_ != nullptr; }

 private:
  std::string source_;
  std::shared_ptr<const Node> root_;
};

}  // namespace openrpf
