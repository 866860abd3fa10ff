#include "entrate/drift_lang.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "entrate/error.hpp"

namespace entrate {

class ExprParser {
 public:
  ExprParser(std::string_view src, int dim, std::span<const std::string> params, DriftExpr& out)
      : src_(src), dim_(dim), params_(params), out_(out) {}

  int parse() {
    skip_ws();
    if (pos_ == src_.size()) throw ParseError("empty expression", pos_);
    int root = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    return root;
  }

 private:
  using Op = DriftExpr::Op;

  int add(Op op, int lhs = -1, int rhs = -1, double value = 0.0, int index = 0) {
    out_.nodes_.push_back({op, value, index, lhs, rhs});
    return static_cast<int>(out_.nodes_.size()) - 1;
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ == src_.size()) throw ParseError(std::string("expected '") + c + "' before end", pos_);
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = add(Op::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = add(Op::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    int lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = add(Op::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = add(Op::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  int parse_unary() {
    if (accept('-')) return add(Op::Neg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  int parse_power() {
    int base = parse_primary();
    if (accept('^')) return add(Op::Pow, base, -1, parse_exponent());
    return base;
  }

  // Literal exponents only; a^b^c folds to a^(b^c).
  double parse_exponent() {
    skip_ws();
    bool negative = accept('-');
    skip_ws();
    if (pos_ >= src_.size() || !(std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
      throw ParseError("exponent must be a numeric literal", pos_);
    }
    double e = parse_number_literal();
    if (negative) e = -e;
    if (accept('^')) e = std::pow(e, parse_exponent());
    return e;
  }

  double parse_number_literal() {
    const char* begin = src_.data() + pos_;
    char* end = nullptr;
    // strtod needs a terminated buffer; copy the maximal numeric-looking run.
    std::size_t n = 0;
    while (pos_ + n < src_.size()) {
      char c = src_[pos_ + n];
      bool exp_sign = n > 0 && (c == '+' || c == '-') &&
                      (src_[pos_ + n - 1] == 'e' || src_[pos_ + n - 1] == 'E');
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' || exp_sign) {
        ++n;
      } else {
        break;
      }
    }
    std::string buf(begin, n);
    double v = std::strtod(buf.c_str(), &end);
    std::size_t used = static_cast<std::size_t>(end - buf.c_str());
    if (used == 0) throw ParseError("malformed number", pos_);
    pos_ += used;
    return v;
  }

  int parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      int inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return add(Op::Const, -1, -1, parse_number_literal());
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      std::string name(src_.substr(start, pos_ - start));
      return parse_name(name);
    }
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  int parse_name(const std::string& name) {
    static constexpr std::array<std::pair<std::string_view, Op>, 4> kFuncs{
        {{"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"tanh", Op::Tanh}}};
    for (const auto& [fname, op] : kFuncs) {
      if (name != fname) continue;
      if (!accept('(')) throw ArityError("function '" + name + "' expects 1 argument");
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == ')') {
        throw ArityError("function '" + name + "' expects 1 argument, got 0");
      }
      int arg = parse_expr();
      if (accept(',')) throw ArityError("function '" + name + "' expects 1 argument, got more");
      expect(')');
      return add(op, arg);
    }
    if (int slot = state_slot(name); slot >= 0) return add(Op::Var, -1, -1, 0.0, slot);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i] == name) return add(Op::Param, -1, -1, 0.0, static_cast<int>(i));
    }
    throw UnknownIdentifierError(name);
  }

  int state_slot(const std::string& name) const {
    if (dim_ == 1 && name == "x") return 0;
    if (name.size() >= 2 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      int k = std::atoi(name.c_str() + 1);
      if (k >= 1 && k <= dim_) return k - 1;
    }
    return -1;
  }

  std::string_view src_;
  int dim_;
  std::span<const std::string> params_;
  DriftExpr& out_;
  std::size_t pos_ = 0;
};

DriftExpr DriftExpr::parse(std::string_view source, int dim, std::span<const std::string> param_names) {
  if (dim < 1) throw InputError("state dimension must be positive");
  for (const auto& p : param_names) {
    if (p == "x" || p == "sin" || p == "cos" || p == "exp" || p == "tanh") {
      throw InputError("parameter name '" + p + "' is reserved");
    }
  }
  DriftExpr e;
  e.dim_ = dim;
  e.param_names_.assign(param_names.begin(), param_names.end());
  ExprParser parser(source, dim, param_names, e);
  e.root_ = parser.parse();
  int depth = 0;
  e.compile(e.root_);
  // Stack depth of the postfix program.
  for (const auto& ins : e.program_) {
    switch (ins.op) {
      case Op::Const:
      case Op::Var:
      case Op::Param:
        ++depth;
        break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
        --depth;
        break;
      default:
        break;
    }
    e.max_stack_ = std::max(e.max_stack_, depth);
  }
  return e;
}

void DriftExpr::compile(int node) {
  const Node& n = nodes_[node];
  if (n.lhs >= 0) compile(n.lhs);
  if (n.rhs >= 0) compile(n.rhs);
  program_.push_back({n.op, n.value, n.index, node});
}

namespace {

double int_power(double base, int e) {
  double result = 1.0;
  bool invert = e < 0;
  unsigned k = static_cast<unsigned>(invert ? -e : e);
  double b = base;
  while (k) {
    if (k & 1u) result *= b;
    b *= b;
    k >>= 1u;
  }
  return invert ? 1.0 / result : result;
}

}  // namespace

double DriftExpr::evaluate(std::span<const double> x, std::span<const double> params) const {
  constexpr int kInline = 32;
  std::array<double, kInline> small{};
  std::vector<double> big;
  double* stack = small.data();
  if (max_stack_ > kInline) {
    big.resize(static_cast<std::size_t>(max_stack_));
    stack = big.data();
  }
  int top = -1;
  for (const auto& ins : program_) {
    switch (ins.op) {
      case Op::Const:
        stack[++top] = ins.value;
        break;
      case Op::Var:
        stack[++top] = x[static_cast<std::size_t>(ins.index)];
        break;
      case Op::Param:
        stack[++top] = params[static_cast<std::size_t>(ins.index)];
        break;
      case Op::Neg:
        stack[top] = -stack[top];
        break;
      case Op::Add:
        stack[top - 1] += stack[top];
        --top;
        break;
      case Op::Sub:
        stack[top - 1] -= stack[top];
        --top;
        break;
      case Op::Mul:
        stack[top - 1] *= stack[top];
        --top;
        break;
      case Op::Div:
        if (stack[top] == 0.0) throw DomainError(render(nodes_[ins.node].rhs));
        stack[top - 1] /= stack[top];
        --top;
        break;
      case Op::Pow: {
        double e = ins.value;
        double b = stack[top];
        if (e == std::trunc(e) && std::abs(e) <= 64.0) {
          if (e < 0 && b == 0.0) throw DomainError(render(ins.node));
          stack[top] = int_power(b, static_cast<int>(e));
        } else {
          double v = std::pow(b, e);
          if (std::isnan(v)) throw DomainError(render(ins.node));
          stack[top] = v;
        }
        break;
      }
      case Op::Sin:
        stack[top] = std::sin(stack[top]);
        break;
      case Op::Cos:
        stack[top] = std::cos(stack[top]);
        break;
      case Op::Exp:
        stack[top] = std::exp(stack[top]);
        break;
      case Op::Tanh:
        stack[top] = std::tanh(stack[top]);
        break;
    }
  }
  return stack[0];
}

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string DriftExpr::render(int node) const {
  const Node& n = nodes_[node];
  auto bin = [&](const char* op) { return "(" + render(n.lhs) + " " + op + " " + render(n.rhs) + ")"; };
  auto fn = [&](const char* name) { return std::string(name) + "(" + render(n.lhs) + ")"; };
  switch (n.op) {
    case Op::Const:
      return format_number(n.value);
    case Op::Var:
      return dim_ == 1 ? std::string("x") : "x" + std::to_string(n.index + 1);
    case Op::Param:
      return param_names_[static_cast<std::size_t>(n.index)];
    case Op::Neg:
      return "(-" + render(n.lhs) + ")";
    case Op::Add:
      return bin("+");
    case Op::Sub:
      return bin("-");
    case Op::Mul:
      return bin("*");
    case Op::Div:
      return bin("/");
    case Op::Pow:
      return "(" + render(n.lhs) + "^" + format_number(n.value) + ")";
    case Op::Sin:
      return fn("sin");
    case Op::Cos:
      return fn("cos");
    case Op::Exp:
      return fn("exp");
    case Op::Tanh:
      return fn("tanh");
  }
  return {};
}

std::string DriftExpr::to_string() const { return render(root_); }

// DriftField

DriftField DriftField::from_expressions(const std::vector<std::string>& sources, int dim,
                                        const std::map<std::string, double>& params) {
  if (static_cast<int>(sources.size()) != dim) {
    throw DimensionMismatchError("drift has " + std::to_string(sources.size()) +
                                 " components but state dimension is " + std::to_string(dim));
  }
  DriftField f;
  f.dim_ = dim;
  f.params_ = params;
  std::vector<std::string> names;
  for (const auto& [name, value] : params) {
    names.push_back(name);
    f.param_values_.push_back(value);
  }
  for (std::size_t i = 0; i < sources.size(); ++i) {
    f.components_.push_back(DriftExpr::parse(sources[i], dim, names));
    if (i) f.description_ += "; ";
    f.description_ += sources[i];
  }
  return f;
}

DriftField DriftField::native(int dim, NativeFn fn, std::string description) {
  DriftField f;
  f.dim_ = dim;
  f.native_ = std::move(fn);
  f.description_ = std::move(description);
  return f;
}

void DriftField::evaluate(std::span<const double> x, std::span<double> out) const {
  if (native_) {
    native_(x, out);
    return;
  }
  for (std::size_t i = 0; i < components_.size(); ++i) out[i] = components_[i].evaluate(x, param_values_);
}

std::vector<double> DriftField::operator()(std::span<const double> x) const {
  std::vector<double> out(static_cast<std::size_t>(dim_));
  evaluate(x, out);
  return out;
}

double DriftField::scalar(double x) const {
  if (dim_ != 1) throw DimensionMismatchError("scalar evaluation of a " + std::to_string(dim_) + "-d drift");
  double out = 0.0;
  evaluate(std::span<const double>(&x, 1), std::span<double>(&out, 1));
  return out;
}

}  // namespace entrate
