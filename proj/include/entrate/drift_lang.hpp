#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace entrate {

/// A scalar expression over state variables and named parameters.
///
/// Grammar (whitespace-insensitive):
///
///     expr    := term (('+' | '-') term)*
///     term    := unary (('*' | '/') unary)*
///     unary   := '-' unary | '+' unary | power
///     power   := primary ('^' exponent)?
///     exponent:= ['-'] number ('^' exponent)?
///     primary := number | name | func '(' expr ')' | '(' expr ')'
///     func    := sin | cos | exp | tanh
///
/// State variables are `x` (d = 1) or `x1`..`xd`. Exponents must be numeric
/// literals; `^` is right-associative and binds tighter than unary minus, so
/// `-2^2` is -4.
class DriftExpr {
 public:
  static DriftExpr parse(std::string_view source, int dim,
                         std::span<const std::string> param_names);

  /// `params` is ordered like the `param_names` given to parse().
  double evaluate(std::span<const double> x, std::span<const double> params) const;

  /// Fully parenthesized form; reparses to an equivalent expression.
  std::string to_string() const;

  int dim() const noexcept { return dim_; }
  const std::vector<std::string>& param_names() const noexcept { return param_names_; }

 private:
  enum class Op { Const, Var, Param, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Tanh };

  struct Node {
    Op op;
    double value = 0.0;  // literal, or exponent for Pow
    int index = 0;       // variable or parameter slot
    int lhs = -1;
    int rhs = -1;
  };

  // Postfix instruction; `node` points back into the tree for diagnostics.
  struct Instr {
    Op op;
    double value;
    int index;
    int node;
  };

  friend class ExprParser;

  void compile(int node);
  std::string render(int node) const;

  std::vector<Node> nodes_;
  int root_ = -1;
  std::vector<Instr> program_;
  int max_stack_ = 0;
  int dim_ = 1;
  std::vector<std::string> param_names_;
};

/// A drift g: R^d -> R^d. Either parsed expressions with bound parameters, or
/// a native callable (used by the built-in catalog).
class DriftField {
 public:
  using NativeFn = std::function<void(std::span<const double>, std::span<double>)>;

  static DriftField from_expressions(const std::vector<std::string>& sources, int dim,
                                     const std::map<std::string, double>& params);
  static DriftField native(int dim, NativeFn fn, std::string description);

  void evaluate(std::span<const double> x, std::span<double> out) const;
  std::vector<double> operator()(std::span<const double> x) const;
  double scalar(double x) const;

  int dim() const noexcept { return dim_; }
  const std::string& description() const noexcept { return description_; }
  const std::map<std::string, double>& params() const noexcept { return params_; }

 private:
  int dim_ = 1;
  std::vector<DriftExpr> components_;
  std::vector<double> param_values_;
  std::map<std::string, double> params_;
  NativeFn native_;
  std::string description_;
};

}  // namespace entrate
