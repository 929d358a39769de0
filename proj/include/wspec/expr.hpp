#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wspec {

/// Syntax, identifier or arity error; `offset` is the byte position in the source.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

/// Evaluation outside the domain of a function (log of a nonpositive number,
/// division by zero, ...). Raised instead of producing NaN or infinity.
class FieldDomainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class ExprKind { number, variable, negate, add, sub, mul, div, pow, call };
enum class ExprFunc { exp, sin, cos, sqrt, log };

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

/// Immutable expression tree node. `lhs` carries the operand of unary nodes
/// and calls; `pow` always has a variable-free exponent.
struct ExprNode {
  ExprKind kind;
  double value = 0.0;  ///< number literal
  int variable = 0;    ///< 0 = x, 1 = y, 2 = z
  ExprFunc func = ExprFunc::exp;
  Expr lhs;
  Expr rhs;
};

/// Parses infix arithmetic over the coordinates x, y (and z when dimension is 3).
///
/// Precedence from tightest: `^` (right associative, constant exponent), unary
/// minus, `*` `/`, `+` `-`. Functions: exp, sin, cos, sqrt, log, each taking one
/// argument. `pi` is accepted as a numeric literal.
Expr parse_expression(std::string_view source, int dimension);

/// Evaluates at a point whose size must be at least the highest variable used.
double evaluate(const Expr& e, std::span<const double> point);

/// Exact symbolic partial derivative with respect to coordinate `variable`.
Expr differentiate(const Expr& e, int variable);

/// Renders with full parenthesization and 17-digit literals so that
/// parse(print(e)) reproduces e exactly.
std::string print_expression(const Expr& e);

bool structurally_equal(const Expr& a, const Expr& b);

}  // namespace wspec
