#include "wspec/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace wspec {

namespace {

Expr make(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }
Expr number(double v) { return make({ExprKind::number, v, 0, ExprFunc::exp, nullptr, nullptr}); }
Expr variable(int i) { return make({ExprKind::variable, 0.0, i, ExprFunc::exp, nullptr, nullptr}); }
// A negated literal is stored as the literal itself, so printed trees parse back unchanged.
Expr unary(ExprKind k, Expr a) {
  if (k == ExprKind::negate && a->kind == ExprKind::number) return make({ExprKind::number, -a->value, 0, ExprFunc::exp, nullptr, nullptr});
  return make({k, 0.0, 0, ExprFunc::exp, std::move(a), nullptr});
}
Expr binary(ExprKind k, Expr a, Expr b) { return make({k, 0.0, 0, ExprFunc::exp, std::move(a), std::move(b)}); }
Expr call(ExprFunc f, Expr a) { return make({ExprKind::call, 0.0, 0, f, std::move(a), nullptr}); }

bool is_const(const Expr& e, double v) { return e->kind == ExprKind::number && e->value == v; }

bool has_variable(const Expr& e) {
  if (!e) return false;
  if (e->kind == ExprKind::variable) return true;
  return has_variable(e->lhs) || has_variable(e->rhs);
}

class Parser {
public:
  Parser(std::string_view src, int dim) : src_(src), dim_(dim) {}

  Expr parse() {
    Expr e = expression();
    skip_space();
    if (pos_ != src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    return e;
  }

private:
  std::string_view src_;
  int dim_;
  std::size_t pos_ = 0;

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) {
    if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
    throw ParseError(msg + " '" + std::string(1, src_[pos_]) + "'", pos_);
  }

  Expr expression() {
    Expr e = term();
    for (;;) {
      if (accept('+')) e = binary(ExprKind::add, e, term());
      else if (accept('-')) e = binary(ExprKind::sub, e, term());
      else return e;
    }
  }

  Expr term() {
    Expr e = signed_factor();
    for (;;) {
      if (accept('*')) e = binary(ExprKind::mul, e, signed_factor());
      else if (accept('/')) e = binary(ExprKind::div, e, signed_factor());
      else return e;
    }
  }

  Expr signed_factor() {
    if (accept('-')) return unary(ExprKind::negate, signed_factor());
    if (accept('+')) return signed_factor();
    return power();
  }

  Expr power() {
    Expr base = primary();
    skip_space();
    if (!accept('^')) return base;
    skip_space();
    const std::size_t at = pos_;
    Expr exponent = exponent_operand();
    if (has_variable(exponent)) throw ParseError("exponent must be constant", at);
    return binary(ExprKind::pow, base, exponent);
  }

  Expr exponent_operand() {
    if (accept('-')) return unary(ExprKind::negate, exponent_operand());
    if (accept('+')) return exponent_operand();
    return power();
  }

  Expr primary() {
    skip_space();
    if (pos_ >= src_.size()) fail("");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expression();
      if (!accept(')')) fail("expected ')' but found");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number_literal();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected");
  }

  Expr number_literal() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_, ++n;
      return n;
    };
    std::size_t n = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) throw ParseError("malformed number", start);
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      const std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = save;
    }
    const std::string text(src_.substr(start, pos_ - start));
    return number(std::strtod(text.c_str(), nullptr));
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    const std::string name(src_.substr(start, pos_ - start));
    static const struct {
      const char* name;
      ExprFunc f;
    } funcs[] = {{"exp", ExprFunc::exp}, {"sin", ExprFunc::sin}, {"cos", ExprFunc::cos}, {"sqrt", ExprFunc::sqrt}, {"log", ExprFunc::log}};
    for (const auto& f : funcs) {
      if (name != f.name) continue;
      skip_space();
      if (!accept('(')) throw ParseError("function '" + name + "' expects one argument", pos_);
      skip_space();
      if (pos_ < src_.size() && src_[pos_] == ')') throw ParseError("function '" + name + "' expects one argument, got 0", pos_);
      Expr arg = expression();
      skip_space();
      if (pos_ < src_.size() && src_[pos_] == ',') throw ParseError("function '" + name + "' expects one argument, got more", pos_);
      if (!accept(')')) fail("expected ')' but found");
      return call(f.f, arg);
    }
    if (name == "pi") return number(std::numbers::pi);
    const char* vars[] = {"x", "y", "z"};
    for (int i = 0; i < dim_; ++i) {
      if (name == vars[i]) return variable(i);
    }
    throw ParseError("unknown identifier '" + name + "'", start);
  }
};

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw FieldDomainError(std::string("non-finite result in ") + what);
  return v;
}

// Constructors with light algebraic folding so derivative trees stay small.
Expr add(Expr a, Expr b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  return binary(ExprKind::add, std::move(a), std::move(b));
}
Expr sub(Expr a, Expr b) {
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return unary(ExprKind::negate, std::move(b));
  return binary(ExprKind::sub, std::move(a), std::move(b));
}
Expr mul(Expr a, Expr b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return number(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  return binary(ExprKind::mul, std::move(a), std::move(b));
}
Expr div(Expr a, Expr b) {
  if (is_const(a, 0.0)) return number(0.0);
  if (is_const(b, 1.0)) return a;
  return binary(ExprKind::div, std::move(a), std::move(b));
}
Expr neg(Expr a) {
  if (is_const(a, 0.0)) return a;
  return unary(ExprKind::negate, std::move(a));
}

}  // namespace

Expr parse_expression(std::string_view source, int dimension) {
  if (dimension < 1 || dimension > 3) throw std::invalid_argument("expression dimension must be 1..3");
  return Parser(source, dimension).parse();
}

double evaluate(const Expr& e, std::span<const double> p) {
  switch (e->kind) {
    case ExprKind::number:
      return e->value;
    case ExprKind::variable:
      if (static_cast<std::size_t>(e->variable) >= p.size()) throw FieldDomainError("point has too few coordinates");
      return p[static_cast<std::size_t>(e->variable)];
    case ExprKind::negate:
      return -evaluate(e->lhs, p);
    case ExprKind::add:
      return checked(evaluate(e->lhs, p) + evaluate(e->rhs, p), "addition");
    case ExprKind::sub:
      return checked(evaluate(e->lhs, p) - evaluate(e->rhs, p), "subtraction");
    case ExprKind::mul:
      return checked(evaluate(e->lhs, p) * evaluate(e->rhs, p), "multiplication");
    case ExprKind::div: {
      const double d = evaluate(e->rhs, p);
      if (d == 0.0) throw FieldDomainError("division by zero");
      return checked(evaluate(e->lhs, p) / d, "division");
    }
    case ExprKind::pow: {
      const double b = evaluate(e->lhs, p);
      const double c = evaluate(e->rhs, p);
      const bool integral = c == std::round(c);
      if (b == 0.0 && c < 0.0) throw FieldDomainError("zero raised to a negative power");
      if (b < 0.0 && !integral) throw FieldDomainError("negative base with non-integer exponent");
      return checked(std::pow(b, c), "power");
    }
    case ExprKind::call: {
      const double a = evaluate(e->lhs, p);
      switch (e->func) {
        case ExprFunc::exp:
          return checked(std::exp(a), "exp");
        case ExprFunc::sin:
          return std::sin(a);
        case ExprFunc::cos:
          return std::cos(a);
        case ExprFunc::sqrt:
          if (a < 0.0) throw FieldDomainError("sqrt of a negative number");
          return std::sqrt(a);
        case ExprFunc::log:
          if (a <= 0.0) throw FieldDomainError("log of a nonpositive number");
          return std::log(a);
      }
    }
  }
  throw FieldDomainError("malformed expression");
}

Expr differentiate(const Expr& e, int var) {
  switch (e->kind) {
    case ExprKind::number:
      return number(0.0);
    case ExprKind::variable:
      return number(e->variable == var ? 1.0 : 0.0);
    case ExprKind::negate:
      return neg(differentiate(e->lhs, var));
    case ExprKind::add:
      return add(differentiate(e->lhs, var), differentiate(e->rhs, var));
    case ExprKind::sub:
      return sub(differentiate(e->lhs, var), differentiate(e->rhs, var));
    case ExprKind::mul:
      return add(mul(differentiate(e->lhs, var), e->rhs), mul(e->lhs, differentiate(e->rhs, var)));
    case ExprKind::div: {
      Expr num = sub(mul(differentiate(e->lhs, var), e->rhs), mul(e->lhs, differentiate(e->rhs, var)));
      return div(num, mul(e->rhs, e->rhs));
    }
    case ExprKind::pow: {
      const double c = evaluate(e->rhs, {});
      Expr da = differentiate(e->lhs, var);
      if (is_const(da, 0.0)) return number(0.0);
      Expr lowered = c == 1.0 ? number(1.0) : binary(ExprKind::pow, e->lhs, number(c - 1.0));
      return mul(mul(number(c), lowered), da);
    }
    case ExprKind::call: {
      Expr da = differentiate(e->lhs, var);
      if (is_const(da, 0.0)) return number(0.0);
      switch (e->func) {
        case ExprFunc::exp:
          return mul(e, da);
        case ExprFunc::sin:
          return mul(call(ExprFunc::cos, e->lhs), da);
        case ExprFunc::cos:
          return neg(mul(call(ExprFunc::sin, e->lhs), da));
        case ExprFunc::sqrt:
          return div(da, mul(number(2.0), e));
        case ExprFunc::log:
          return div(da, e->lhs);
      }
    }
  }
  throw std::logic_error("malformed expression");
}

std::string print_expression(const Expr& e) {
  switch (e->kind) {
    case ExprKind::number: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", e->value);
      return e->value < 0.0 ? "(" + std::string(buf) + ")" : std::string(buf);
    }
    case ExprKind::variable:
      return std::string(1, "xyz"[e->variable]);
    case ExprKind::negate:
      return "(-" + print_expression(e->lhs) + ")";
    case ExprKind::call: {
      static const char* names[] = {"exp", "sin", "cos", "sqrt", "log"};
      return std::string(names[static_cast<int>(e->func)]) + "(" + print_expression(e->lhs) + ")";
    }
    default: {
      const char op = e->kind == ExprKind::add ? '+' : e->kind == ExprKind::sub ? '-' : e->kind == ExprKind::mul ? '*' : e->kind == ExprKind::div ? '/' : '^';
      return "(" + print_expression(e->lhs) + op + print_expression(e->rhs) + ")";
    }
  }
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (!a || !b) return !a && !b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprKind::number:
      return a->value == b->value;
    case ExprKind::variable:
      return a->variable == b->variable;
    case ExprKind::call:
      return a->func == b->func && structurally_equal(a->lhs, b->lhs);
    default:
      return structurally_equal(a->lhs, b->lhs) && structurally_equal(a->rhs, b->rhs);
  }
}

}  // namespace wspec
