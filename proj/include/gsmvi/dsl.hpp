#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gsmvi/errors.hpp"

/// A small differentiable expression language for user-defined log joints.
///
/// Grammar:
///
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := atom ('^' exponent)? | '-' factor
///   exponent := '-'? int ('^' exponent)?        (folded; must be an integer in [-8, 8])
///   atom   := number | 'theta' '[' index ']' | func '(' expr ')'
///           | 'dot' '(' 'theta' ',' 'theta' ')' | 'sum' '(' expr ')' | '(' expr ')' | 'i'
///   func   := exp | log | sqrt | sinh | cosh | asinh | tanh | abs
///
/// Inside sum(...), the index variable `i` runs over 0..dim-1 and may be
/// used as theta[i] or as a number. sum may not be nested.
namespace gsmvi::dsl {

struct SourceSpan {
  std::size_t start = 0;
  std::size_t end = 0;
};

enum class ParseErrorKind { lexical, syntax, unknown_identifier, arity, index_out_of_range, invalid_exponent };

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, SourceSpan span, const std::string& message);
  ParseErrorKind kind() const { return kind_; }
  SourceSpan span() const { return span_; }

 private:
  ParseErrorKind kind_;
  SourceSpan span_;
};

enum class EvalErrorKind { domain, division_by_zero, non_finite };

class EvalError : public Error {
 public:
  EvalError(EvalErrorKind kind, SourceSpan span, const std::string& message);
  EvalErrorKind kind() const { return kind_; }
  SourceSpan span() const { return span_; }

 private:
  EvalErrorKind kind_;
  SourceSpan span_;
};

enum class NodeKind {
  constant,
  coordinate,   // theta[k], or theta[i] when index == kLoopIndex
  loop_index,   // bare i
  dot_self,     // dot(theta, theta)
  add,
  sub,
  mul,
  div,
  pow,
  neg,
  exp,
  log,
  sqrt,
  sinh,
  cosh,
  asinh,
  tanh,
  abs,
  sum,
};

inline constexpr int kLoopIndex = -1;

struct Node {
  NodeKind kind = NodeKind::constant;
  double value = 0.0;  // constant
  int index = 0;       // coordinate
  int exponent = 0;    // pow
  int lhs = -1;
  int rhs = -1;
  SourceSpan span;
};

/// Immutable parsed program. Cheap to copy (shared node storage).
class ExprAst {
 public:
  ExprAst(std::shared_ptr<const std::vector<Node>> nodes, int root, Eigen::Index dim)
      : nodes_(std::move(nodes)), root_(root), dim_(dim) {}

  Eigen::Index dim() const { return dim_; }
  int root() const { return root_; }
  const Node& node(int i) const { return (*nodes_)[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return nodes_->size(); }

 private:
  std::shared_ptr<const std::vector<Node>> nodes_;
  int root_;
  Eigen::Index dim_;
};

ExprAst parse(std::string_view text, Eigen::Index dim);

double evaluate(const ExprAst& ast, const Eigen::VectorXd& theta);

/// Exact gradient by a reverse sweep over the evaluation tape.
Eigen::VectorXd differentiate(const ExprAst& ast, const Eigen::VectorXd& theta);

std::pair<double, Eigen::VectorXd> value_and_gradient(const ExprAst& ast, const Eigen::VectorXd& theta);

/// Canonical, fully parenthesized text that parses back to the same tree.
std::string print(const ExprAst& ast);

bool structurally_equal(const ExprAst& a, const ExprAst& b);

}  // namespace gsmvi::dsl
