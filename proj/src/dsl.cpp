#include "gsmvi/dsl.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <optional>

namespace gsmvi::dsl {

ParseError::ParseError(ParseErrorKind kind, SourceSpan span, const std::string& message)
    : Error("parse error at " + std::to_string(span.start) + ".." + std::to_string(span.end) + ": " + message),
      kind_(kind),
      span_(span) {}

EvalError::EvalError(EvalErrorKind kind, SourceSpan span, const std::string& message)
    : Error("evaluation error at " + std::to_string(span.start) + ".." + std::to_string(span.end) + ": " +
            message),
      kind_(kind),
      span_(span) {}

namespace {

// ---------------------------------------------------------------- lexing

enum class Tok { number, ident, lbracket, rbracket, lparen, rparen, comma, plus, minus, star, slash, caret, end };

struct Token {
  Tok kind;
  SourceSpan span;
  std::string_view text;
  double number = 0.0;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t pos = 0;
  while (pos < src.size()) {
    const char c = src[pos];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
      continue;
    }
    const std::size_t start = pos;
    auto single = [&](Tok k) {
      out.push_back({k, {start, start + 1}, src.substr(start, 1)});
      ++pos;
    };
    switch (c) {
      case '[': single(Tok::lbracket); continue;
      case ']': single(Tok::rbracket); continue;
      case '(': single(Tok::lparen); continue;
      case ')': single(Tok::rparen); continue;
      case ',': single(Tok::comma); continue;
      case '+': single(Tok::plus); continue;
      case '-': single(Tok::minus); continue;
      case '*': single(Tok::star); continue;
      case '/': single(Tok::slash); continue;
      case '^': single(Tok::caret); continue;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      while (pos < src.size() && (std::isdigit(static_cast<unsigned char>(src[pos])) || src[pos] == '.')) ++pos;
      if (pos < src.size() && (src[pos] == 'e' || src[pos] == 'E')) {
        std::size_t p = pos + 1;
        if (p < src.size() && (src[p] == '+' || src[p] == '-')) ++p;
        if (p < src.size() && std::isdigit(static_cast<unsigned char>(src[p]))) {
          pos = p;
          while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) ++pos;
        }
      }
      Token t{Tok::number, {start, pos}, src.substr(start, pos - start)};
      const char* first = src.data() + start;
      const char* last = src.data() + pos;
      auto [ptr, ec] = std::from_chars(first, last, t.number);
      if (ec != std::errc() || ptr != last)
        throw ParseError(ParseErrorKind::lexical, t.span, "malformed number '" + std::string(t.text) + "'");
      out.push_back(t);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos < src.size() && (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_')) ++pos;
      out.push_back({Tok::ident, {start, pos}, src.substr(start, pos - start)});
      continue;
    }
    throw ParseError(ParseErrorKind::lexical, {start, start + 1},
                     std::string("unexpected character '") + c + "'");
  }
  out.push_back({Tok::end, {src.size(), src.size()}, {}});
  return out;
}

// ---------------------------------------------------------------- parsing

struct FuncEntry {
  const char* name;
  NodeKind kind;
};

constexpr std::array<FuncEntry, 8> kFunctions{{
    {"exp", NodeKind::exp},
    {"log", NodeKind::log},
    {"sqrt", NodeKind::sqrt},
    {"sinh", NodeKind::sinh},
    {"cosh", NodeKind::cosh},
    {"asinh", NodeKind::asinh},
    {"tanh", NodeKind::tanh},
    {"abs", NodeKind::abs},
}};

std::optional<NodeKind> lookup_function(std::string_view name) {
  for (const auto& f : kFunctions)
    if (name == f.name) return f.kind;
  return std::nullopt;
}

const char* function_name(NodeKind kind) {
  for (const auto& f : kFunctions)
    if (f.kind == kind) return f.name;
  return "?";
}

class Parser {
 public:
  Parser(std::string_view src, Eigen::Index dim) : tokens_(lex(src)), dim_(dim) {}

  ExprAst run() {
    const int root = expr();
    if (peek().kind != Tok::end) fail_syntax(peek(), "unexpected token '" + std::string(peek().text) + "'");
    return ExprAst(std::make_shared<const std::vector<Node>>(std::move(nodes_)), root, dim_);
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& take() { return tokens_[pos_++]; }

  [[noreturn]] static void fail_syntax(const Token& t, const std::string& msg) {
    throw ParseError(ParseErrorKind::syntax, t.span, msg);
  }

  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind) {
      const Token& t = peek();
      fail_syntax(t, std::string("expected ") + what +
                         (t.kind == Tok::end ? " before end of input" : ", found '" + std::string(t.text) + "'"));
    }
    return take();
  }

  int add(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  SourceSpan span_of(int node) const { return nodes_[static_cast<std::size_t>(node)].span; }

  int binary(NodeKind kind, int lhs, int rhs) {
    Node n;
    n.kind = kind;
    n.lhs = lhs;
    n.rhs = rhs;
    n.span = {span_of(lhs).start, span_of(rhs).end};
    return add(n);
  }

  int expr() {
    int lhs = term();
    while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
      const NodeKind kind = take().kind == Tok::plus ? NodeKind::add : NodeKind::sub;
      lhs = binary(kind, lhs, term());
    }
    return lhs;
  }

  int term() {
    int lhs = factor();
    while (peek().kind == Tok::star || peek().kind == Tok::slash) {
      const NodeKind kind = take().kind == Tok::star ? NodeKind::mul : NodeKind::div;
      lhs = binary(kind, lhs, factor());
    }
    return lhs;
  }

  int factor() {
    if (peek().kind == Tok::minus) {
      const Token& minus = take();
      const int operand = factor();
      Node n;
      n.kind = NodeKind::neg;
      n.lhs = operand;
      n.span = {minus.span.start, span_of(operand).end};
      return add(n);
    }
    const int base = atom();
    if (peek().kind != Tok::caret) return base;
    take();
    const std::size_t exp_start = peek().span.start;
    const double e = exponent();
    const SourceSpan exp_span{exp_start, tokens_[pos_ - 1].span.end};
    if (!(e >= -8.0 && e <= 8.0) || e != std::floor(e))
      throw ParseError(ParseErrorKind::invalid_exponent, exp_span,
                       "exponent must be an integer constant in [-8, 8]");
    Node n;
    n.kind = NodeKind::pow;
    n.lhs = base;
    n.exponent = static_cast<int>(e);
    n.span = {span_of(base).start, exp_span.end};
    return add(n);
  }

  // Integer literal exponent, right-associative and constant-folded.
  double exponent() {
    double sign = 1.0;
    if (peek().kind == Tok::minus) {
      take();
      sign = -1.0;
    }
    const Token& t = peek();
    if (t.kind != Tok::number)
      throw ParseError(ParseErrorKind::invalid_exponent, t.span, "exponent must be an integer constant");
    take();
    if (t.number != std::floor(t.number))
      throw ParseError(ParseErrorKind::invalid_exponent, t.span, "exponent must be an integer constant");
    double value = sign * t.number;
    if (peek().kind == Tok::caret) {
      take();
      value = std::pow(value, exponent());
    }
    return value;
  }

  int atom() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::number: {
        take();
        Node n;
        n.kind = NodeKind::constant;
        n.value = t.number;
        n.span = t.span;
        return add(n);
      }
      case Tok::lparen: {
        take();
        const int inner = expr();
        expect(Tok::rparen, "')'");
        return inner;
      }
      case Tok::ident:
        return identifier();
      default:
        fail_syntax(t, t.kind == Tok::end ? "unexpected end of input" : "unexpected token '" + std::string(t.text) + "'");
    }
  }

  int identifier() {
    const Token& id = take();
    if (id.text == "theta") return coordinate(id);
    if (id.text == "i") {
      if (!in_sum_) throw ParseError(ParseErrorKind::unknown_identifier, id.span, "index variable 'i' used outside sum(...)");
      Node n;
      n.kind = NodeKind::loop_index;
      n.span = id.span;
      return add(n);
    }
    if (id.text == "dot") return dot(id);
    if (id.text == "sum") return sum(id);
    if (auto kind = lookup_function(id.text)) {
      const auto [args, close] = call_args();
      if (args.size() != 1)
        throw ParseError(ParseErrorKind::arity, {id.span.start, close},
                         std::string(id.text) + " takes 1 argument, got " + std::to_string(args.size()));
      Node n;
      n.kind = *kind;
      n.lhs = args[0];
      n.span = {id.span.start, close};
      return add(n);
    }
    throw ParseError(ParseErrorKind::unknown_identifier, id.span, "unknown identifier '" + std::string(id.text) + "'");
  }

  // '(' expr (',' expr)* ')'. Returns argument nodes and the end offset of ')'.
  std::pair<std::vector<int>, std::size_t> call_args() {
    expect(Tok::lparen, "'('");
    std::vector<int> args;
    if (peek().kind != Tok::rparen) {
      args.push_back(expr());
      while (peek().kind == Tok::comma) {
        take();
        args.push_back(expr());
      }
    }
    const Token& close = expect(Tok::rparen, "')'");
    return {args, close.span.end};
  }

  int coordinate(const Token& id) {
    const Token& open = expect(Tok::lbracket, "'[' after theta");
    const Token& idx = peek();
    Node n;
    n.kind = NodeKind::coordinate;
    if (idx.kind == Tok::ident && idx.text == "i") {
      if (!in_sum_) throw ParseError(ParseErrorKind::unknown_identifier, idx.span, "index variable 'i' used outside sum(...)");
      take();
      n.index = kLoopIndex;
    } else if (idx.kind == Tok::number) {
      take();
      if (idx.number != std::floor(idx.number) || idx.number < 0.0)
        fail_syntax(idx, "coordinate index must be a nonnegative integer");
      const Token& close = expect(Tok::rbracket, "']'");
      if (idx.number >= static_cast<double>(dim_))
        throw ParseError(ParseErrorKind::index_out_of_range, {open.span.start, close.span.end},
                         "index " + std::string(idx.text) + " out of range for dimension " + std::to_string(dim_));
      n.index = static_cast<int>(idx.number);
      n.span = {id.span.start, close.span.end};
      return add(n);
    } else {
      fail_syntax(idx, "expected a coordinate index");
    }
    const Token& close = expect(Tok::rbracket, "']'");
    n.span = {id.span.start, close.span.end};
    return add(n);
  }

  int dot(const Token& id) {
    expect(Tok::lparen, "'(' after dot");
    std::size_t count = 0;
    bool all_theta = true;
    if (peek().kind != Tok::rparen) {
      for (;;) {
        const Token& arg = peek();
        if (arg.kind == Tok::ident && arg.text == "theta" && tokens_[pos_ + 1].kind != Tok::lbracket) {
          take();
        } else {
          all_theta = false;
          expr();
        }
        ++count;
        if (peek().kind != Tok::comma) break;
        take();
      }
    }
    const Token& close = expect(Tok::rparen, "')'");
    const SourceSpan span{id.span.start, close.span.end};
    if (count != 2)
      throw ParseError(ParseErrorKind::arity, span, "dot takes 2 arguments, got " + std::to_string(count));
    if (!all_theta) fail_syntax(id, "dot supports only dot(theta, theta)");
    Node n;
    n.kind = NodeKind::dot_self;
    n.span = span;
    return add(n);
  }

  int sum(const Token& id) {
    if (in_sum_) fail_syntax(id, "sum(...) may not be nested");
    in_sum_ = true;
    const auto [args, close] = call_args();
    in_sum_ = false;
    if (args.size() != 1)
      throw ParseError(ParseErrorKind::arity, {id.span.start, close},
                       "sum takes 1 argument, got " + std::to_string(args.size()));
    Node n;
    n.kind = NodeKind::sum;
    n.lhs = args[0];
    n.span = {id.span.start, close};
    return add(n);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  Eigen::Index dim_;
  std::vector<Node> nodes_;
  bool in_sum_ = false;
};

// ---------------------------------------------------------------- evaluation

struct TapeEntry {
  NodeKind kind;
  int a = -1;  // tape operand indices; -1 for theta-independent operands
  int b = -1;
  double value = 0.0;
  double va = 0.0;  // operand values
  double vb = 0.0;
  int coord = -1;
  int exponent = 0;
};

struct Evaluated {
  double value;
  int tape;  // -1 when the subtree does not depend on theta (or no tape)
};

/// Forward sweep. Records a tape when `tape` is non-null.
class Evaluator {
 public:
  Evaluator(const ExprAst& ast, const Eigen::VectorXd& theta, std::vector<TapeEntry>* tape)
      : ast_(ast), theta_(theta), tape_(tape) {
    if (theta.size() != ast.dim())
      throw DimensionMismatch("dsl: program dimension " + std::to_string(ast.dim()) + ", got point of dimension " +
                              std::to_string(theta.size()));
    if (!theta.allFinite()) throw NonFiniteValue("dsl: point contains non-finite entries");
  }

  Evaluated eval(int id) {
    const Node& n = ast_.node(id);
    switch (n.kind) {
      case NodeKind::constant:
        return {n.value, -1};
      case NodeKind::loop_index:
        return {static_cast<double>(loop_), -1};
      case NodeKind::coordinate: {
        const int c = n.index == kLoopIndex ? loop_ : n.index;
        if (!tape_) return {theta_[c], -1};
        TapeEntry e{NodeKind::coordinate};
        e.value = theta_[c];
        e.coord = c;
        return push(e);
      }
      case NodeKind::dot_self: {
        const double v = theta_.squaredNorm();
        check(n, v);
        if (!tape_) return {v, -1};
        TapeEntry e{NodeKind::dot_self};
        e.value = v;
        return push(e);
      }
      case NodeKind::sum: {
        Evaluated acc{0.0, -1};
        for (int i = 0; i < static_cast<int>(ast_.dim()); ++i) {
          loop_ = i;
          const Evaluated body = eval(n.lhs);
          acc = i == 0 ? body : record(n, NodeKind::add, acc.value + body.value, acc, body);
        }
        loop_ = 0;
        return acc;
      }
      case NodeKind::add:
      case NodeKind::sub:
      case NodeKind::mul:
      case NodeKind::div: {
        const Evaluated x = eval(n.lhs);
        const Evaluated y = eval(n.rhs);
        double v = 0.0;
        switch (n.kind) {
          case NodeKind::add: v = x.value + y.value; break;
          case NodeKind::sub: v = x.value - y.value; break;
          case NodeKind::mul: v = x.value * y.value; break;
          default:
            if (y.value == 0.0) throw EvalError(EvalErrorKind::division_by_zero, n.span, "division by zero");
            v = x.value / y.value;
        }
        return record(n, n.kind, v, x, y);
      }
      case NodeKind::pow: {
        const Evaluated x = eval(n.lhs);
        if (x.value == 0.0 && n.exponent < 0)
          throw EvalError(EvalErrorKind::division_by_zero, n.span, "zero raised to a negative power");
        Evaluated r = record(n, NodeKind::pow, std::pow(x.value, n.exponent), x, {0.0, -1});
        if (r.tape >= 0) (*tape_)[static_cast<std::size_t>(r.tape)].exponent = n.exponent;
        return r;
      }
      default: {
        const Evaluated x = eval(n.lhs);
        const double a = x.value;
        double v = 0.0;
        switch (n.kind) {
          case NodeKind::neg: v = -a; break;
          case NodeKind::exp: v = std::exp(a); break;
          case NodeKind::log:
            if (a < 0.0) throw EvalError(EvalErrorKind::domain, n.span, "log of a negative argument");
            v = std::log(a);
            break;
          case NodeKind::sqrt:
            if (a < 0.0) throw EvalError(EvalErrorKind::domain, n.span, "sqrt of a negative argument");
            v = std::sqrt(a);
            break;
          case NodeKind::sinh: v = std::sinh(a); break;
          case NodeKind::cosh: v = std::cosh(a); break;
          case NodeKind::asinh: v = std::asinh(a); break;
          case NodeKind::tanh: v = std::tanh(a); break;
          case NodeKind::abs: v = std::abs(a); break;
          default: throw Error("dsl: corrupt syntax tree");
        }
        return record(n, n.kind, v, x, {0.0, -1});
      }
    }
    throw Error("dsl: corrupt syntax tree");
  }

 private:
  static void check(const Node& n, double v) {
    if (!std::isfinite(v)) throw EvalError(EvalErrorKind::non_finite, n.span, "non-finite intermediate value");
  }

  Evaluated push(const TapeEntry& e) {
    tape_->push_back(e);
    return {e.value, static_cast<int>(tape_->size()) - 1};
  }

  Evaluated record(const Node& n, NodeKind kind, double v, Evaluated x, Evaluated y) {
    check(n, v);
    if (!tape_ || (x.tape < 0 && y.tape < 0)) return {v, -1};
    TapeEntry e{kind};
    e.a = x.tape;
    e.b = y.tape;
    e.value = v;
    e.va = x.value;
    e.vb = y.value;
    return push(e);
  }

  const ExprAst& ast_;
  const Eigen::VectorXd& theta_;
  std::vector<TapeEntry>* tape_;
  int loop_ = 0;
};

// ---------------------------------------------------------------- printing

void print_node(const ExprAst& ast, int id, std::string& out) {
  const Node& n = ast.node(id);
  auto binary = [&](const char* op) {
    out += '(';
    print_node(ast, n.lhs, out);
    out += op;
    print_node(ast, n.rhs, out);
    out += ')';
  };
  switch (n.kind) {
    case NodeKind::constant: {
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), n.value);
      (void)ec;
      out.append(buf, ptr);
      return;
    }
    case NodeKind::coordinate:
      out += "theta[";
      out += n.index == kLoopIndex ? std::string("i") : std::to_string(n.index);
      out += ']';
      return;
    case NodeKind::loop_index: out += 'i'; return;
    case NodeKind::dot_self: out += "dot(theta,theta)"; return;
    case NodeKind::add: binary(" + "); return;
    case NodeKind::sub: binary(" - "); return;
    case NodeKind::mul: binary(" * "); return;
    case NodeKind::div: binary(" / "); return;
    case NodeKind::pow:
      out += '(';
      print_node(ast, n.lhs, out);
      out += ")^";
      out += std::to_string(n.exponent);
      return;
    case NodeKind::neg:
      out += "-(";
      print_node(ast, n.lhs, out);
      out += ')';
      return;
    case NodeKind::sum:
      out += "sum(";
      print_node(ast, n.lhs, out);
      out += ')';
      return;
    default:
      out += function_name(n.kind);
      out += '(';
      print_node(ast, n.lhs, out);
      out += ')';
      return;
  }
}

bool equal_nodes(const ExprAst& a, int ia, const ExprAst& b, int ib) {
  const Node& x = a.node(ia);
  const Node& y = b.node(ib);
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case NodeKind::constant: return std::memcmp(&x.value, &y.value, sizeof(double)) == 0;
    case NodeKind::coordinate: return x.index == y.index;
    case NodeKind::loop_index:
    case NodeKind::dot_self: return true;
    case NodeKind::add:
    case NodeKind::sub:
    case NodeKind::mul:
    case NodeKind::div: return equal_nodes(a, x.lhs, b, y.lhs) && equal_nodes(a, x.rhs, b, y.rhs);
    case NodeKind::pow: return x.exponent == y.exponent && equal_nodes(a, x.lhs, b, y.lhs);
    default: return equal_nodes(a, x.lhs, b, y.lhs);
  }
}

}  // namespace

ExprAst parse(std::string_view text, Eigen::Index dim) {
  if (dim < 1) throw InvalidArgument("dsl: dimension must be positive");
  return Parser(text, dim).run();
}

double evaluate(const ExprAst& ast, const Eigen::VectorXd& theta) {
  Evaluator ev(ast, theta, nullptr);
  return ev.eval(ast.root()).value;
}

std::pair<double, Eigen::VectorXd> value_and_gradient(const ExprAst& ast, const Eigen::VectorXd& theta) {
  std::vector<TapeEntry> tape;
  Evaluator ev(ast, theta, &tape);
  const Evaluated top = ev.eval(ast.root());

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(ast.dim());
  if (top.tape < 0) return {top.value, grad};

  std::vector<double> adj(tape.size(), 0.0);
  adj[static_cast<std::size_t>(top.tape)] = 1.0;
  auto give = [&](int to, double amount) {
    if (to >= 0) adj[static_cast<std::size_t>(to)] += amount;
  };
  for (std::size_t k = tape.size(); k-- > 0;) {
    const TapeEntry& e = tape[k];
    const double w = adj[k];
    if (w == 0.0) continue;
    switch (e.kind) {
      case NodeKind::coordinate: grad[e.coord] += w; break;
      case NodeKind::dot_self: grad += (2.0 * w) * theta; break;
      case NodeKind::add: give(e.a, w); give(e.b, w); break;
      case NodeKind::sub: give(e.a, w); give(e.b, -w); break;
      case NodeKind::mul: give(e.a, w * e.vb); give(e.b, w * e.va); break;
      case NodeKind::div:
        give(e.a, w / e.vb);
        give(e.b, -w * e.va / (e.vb * e.vb));
        break;
      case NodeKind::pow:
        give(e.a, e.exponent == 0 ? 0.0 : w * e.exponent * std::pow(e.va, e.exponent - 1));
        break;
      case NodeKind::neg: give(e.a, -w); break;
      case NodeKind::exp: give(e.a, w * e.value); break;
      case NodeKind::log: give(e.a, w / e.va); break;
      case NodeKind::sqrt: give(e.a, w * 0.5 / e.value); break;
      case NodeKind::sinh: give(e.a, w * std::cosh(e.va)); break;
      case NodeKind::cosh: give(e.a, w * std::sinh(e.va)); break;
      case NodeKind::asinh: give(e.a, w / std::sqrt(1.0 + e.va * e.va)); break;
      case NodeKind::tanh: give(e.a, w * (1.0 - e.value * e.value)); break;
      case NodeKind::abs: give(e.a, e.va > 0.0 ? w : (e.va < 0.0 ? -w : 0.0)); break;
      default: break;
    }
  }
  if (!grad.allFinite())
    throw EvalError(EvalErrorKind::non_finite, ast.node(ast.root()).span, "gradient is not finite at this point");
  return {top.value, grad};
}

Eigen::VectorXd differentiate(const ExprAst& ast, const Eigen::VectorXd& theta) {
  return value_and_gradient(ast, theta).second;
}

std::string print(const ExprAst& ast) {
  std::string out;
  print_node(ast, ast.root(), out);
  return out;
}

bool structurally_equal(const ExprAst& a, const ExprAst& b) {
  return a.dim() == b.dim() && equal_nodes(a, a.root(), b, b.root());
}

}  // namespace gsmvi::dsl
