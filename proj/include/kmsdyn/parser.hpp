#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kmsdyn/error.hpp"
#include "kmsdyn/exact.hpp"
#include "kmsdyn/projective.hpp"
#include "kmsdyn/ratmap.hpp"

namespace kmsdyn {

/// Expression tree over z, the imaginary unit, rational literals, the four
/// arithmetic operations and integer powers.
struct Expr {
  enum class Kind { Var, Imag, Num, Neg, Add, Sub, Mul, Div, Pow };

  Kind kind = Kind::Num;
  rational value{0};  // Num
  std::string text;   // Num: literal as written
  int exponent = 0;   // Pow
  std::vector<Expr> args;

  /// Structural equality; literal spelling is ignored.
  friend bool operator==(const Expr& a, const Expr& b) {
    return a.kind == b.kind && a.value == b.value && a.exponent == b.exponent && a.args == b.args;
  }
};

/// Exact rational function num/den over Q(i).
struct RationalFunction {
  ExactPoly num;
  ExactPoly den{GaussianRational(1)};
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::SyntaxError, "at position " + std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  bool accept(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  static Expr binary(Expr::Kind k, Expr a, Expr b) {
    Expr e;
    e.kind = k;
    e.args.push_back(std::move(a));
    e.args.push_back(std::move(b));
    return e;
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) lhs = binary(Expr::Kind::Add, std::move(lhs), term());
      else if (accept('-')) lhs = binary(Expr::Kind::Sub, std::move(lhs), term());
      else return lhs;
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      const char c = peek();
      if (accept('*')) lhs = binary(Expr::Kind::Mul, std::move(lhs), unary());
      else if (accept('/')) lhs = binary(Expr::Kind::Div, std::move(lhs), unary());
      else if (c == 'z' || c == 'i' || c == '(') lhs = binary(Expr::Kind::Mul, std::move(lhs), power());
      else return lhs;
    }
  }

  Expr unary() {
    if (accept('-')) {
      Expr e;
      e.kind = Expr::Kind::Neg;
      e.args.push_back(unary());
      return e;
    }
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (!accept('^')) return base;
    const bool paren = accept('(');
    int sign = 1;
    if (accept('-')) sign = -1;
    else accept('+');
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (start == pos_) fail("expected an integer exponent");
    if (pos_ - start > 3) fail("exponent too large");
    const int k = std::stoi(std::string(src_.substr(start, pos_ - start)));
    if (paren && !accept(')')) fail("expected ')'");
    Expr e;
    e.kind = Expr::Kind::Pow;
    e.exponent = sign * k;
    e.args.push_back(std::move(base));
    return e;
  }

  Expr primary() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (c == 'z') {
      ++pos_;
      Expr e;
      e.kind = Expr::Kind::Var;
      return e;
    }
    if (c == 'i') {
      ++pos_;
      Expr e;
      e.kind = Expr::Kind::Imag;
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == '\0') fail("unexpected end of input");
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expr number() {
    const std::size_t start = pos_;
    std::string digits;
    int frac = 0;
    bool dot = false;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digits += c;
        if (dot) ++frac;
      } else if (c == '.' && !dot) {
        dot = true;
      } else {
        break;
      }
      ++pos_;
    }
    if (digits.empty()) fail("malformed number");
    Expr e;
    e.kind = Expr::Kind::Num;
    e.text = std::string(src_.substr(start, pos_ - start));
    // Leading zeros would select octal in cpp_int's string constructor.
    const auto nz = digits.find_first_not_of('0');
    boost::multiprecision::cpp_int n(nz == std::string::npos ? std::string("0") : digits.substr(nz));
    boost::multiprecision::cpp_int d = 1;
    for (int k = 0; k < frac; ++k) d *= 10;
    e.value = rational(n, d);
    return e;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

inline RationalFunction eval(const Expr& e) {
  using K = Expr::Kind;
  auto reduce = [](RationalFunction f) {
    if (f.den.is_zero()) throw Error(ErrorKind::DivisionByZeroPolynomial, "division by the zero polynomial");
    const ExactPoly g = gcd(f.num, f.den);
    if (g.degree() > 0) {
      f.num = f.num / g;
      f.den = f.den / g;
    }
    return f;
  };
  switch (e.kind) {
    case K::Var: return {ExactPoly::z(), ExactPoly(GaussianRational(1))};
    case K::Imag: return {ExactPoly(GaussianRational::i()), ExactPoly(GaussianRational(1))};
    case K::Num: return {ExactPoly(GaussianRational(e.value)), ExactPoly(GaussianRational(1))};
    case K::Neg: {
      auto a = eval(e.args[0]);
      return {-a.num, a.den};
    }
    case K::Add:
    case K::Sub: {
      auto a = eval(e.args[0]);
      auto b = eval(e.args[1]);
      ExactPoly rhs = b.num * a.den;
      return reduce({a.num * b.den + (e.kind == K::Add ? rhs : -rhs), a.den * b.den});
    }
    case K::Mul: {
      auto a = eval(e.args[0]);
      auto b = eval(e.args[1]);
      return reduce({a.num * b.num, a.den * b.den});
    }
    case K::Div: {
      auto a = eval(e.args[0]);
      auto b = eval(e.args[1]);
      if (b.num.is_zero()) throw Error(ErrorKind::DivisionByZeroPolynomial, "division by the zero polynomial");
      return reduce({a.num * b.den, a.den * b.num});
    }
    case K::Pow: {
      auto a = eval(e.args[0]);
      int k = e.exponent;
      if (k < 0) {
        if (a.num.is_zero()) throw Error(ErrorKind::DivisionByZeroPolynomial, "negative power of zero");
        std::swap(a.num, a.den);
        k = -k;
      }
      RationalFunction r{ExactPoly(GaussianRational(1)), ExactPoly(GaussianRational(1))};
      for (int j = 0; j < k; ++j) r = {r.num * a.num, r.den * a.den};
      return reduce(r);
    }
  }
  return {};
}

}  // namespace detail

/// Parsed source text plus its expression tree.
struct MapExpression {
  std::string source;
  Expr ast;
};

inline MapExpression parse_expression(std::string_view src) {
  return {std::string(src), detail::Parser(src).parse()};
}

/// Fully parenthesized rendering; reparsing yields the same tree.
inline std::string print(const Expr& e) {
  using K = Expr::Kind;
  switch (e.kind) {
    case K::Var: return "z";
    case K::Imag: return "i";
    case K::Num: return e.text.empty() ? e.value.str() : e.text;
    case K::Neg: return "(-" + print(e.args[0]) + ")";
    case K::Add: return "(" + print(e.args[0]) + "+" + print(e.args[1]) + ")";
    case K::Sub: return "(" + print(e.args[0]) + "-" + print(e.args[1]) + ")";
    case K::Mul: return "(" + print(e.args[0]) + "*" + print(e.args[1]) + ")";
    case K::Div: return "(" + print(e.args[0]) + "/" + print(e.args[1]) + ")";
    case K::Pow: {
      const Expr& b = e.args[0];
      const bool atomic = b.kind == K::Var || b.kind == K::Imag || b.kind == K::Num;
      const std::string base = atomic ? print(b) : "(" + print(b) + ")";
      return base + "^" + (e.exponent < 0 ? "(" + std::to_string(e.exponent) + ")" : std::to_string(e.exponent));
    }
  }
  return {};
}

/// Coprime numerator/denominator with monic denominator.
inline RationalFunction to_rational_function(const Expr& e) {
  RationalFunction f = detail::eval(e);
  const GaussianRational lead = f.den.leading();
  std::vector<GaussianRational> n = f.num.coeffs(), d = f.den.coeffs();
  for (auto& c : n) c = c / lead;
  for (auto& c : d) c = c / lead;
  return {ExactPoly(std::move(n)), ExactPoly(std::move(d))};
}

inline RationalMap parse_map(std::string_view src) {
  const auto f = to_rational_function(parse_expression(src).ast);
  return RationalMap(f.num, f.den);
}

/// A constant expression ("0.5+2*i", "-1/3") or "inf".
inline SpherePoint parse_point(std::string_view src) {
  std::string s(src);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
  if (s == "inf" || s == "infinity" || s == "oo") return infinity();
  const auto f = to_rational_function(parse_expression(s).ast);
  if (f.num.degree() > 0 || f.den.degree() > 0)
    throw Error(ErrorKind::SyntaxError, "point must be a constant, got an expression in z");
  return from_affine(f.num.is_zero() ? complex{} : f.num.coeff(0).to_complex());
}

/// "z^3 - 16/27" style rendering of an exact polynomial.
inline std::string to_string(const ExactPoly& p) {
  if (p.is_zero()) return "0";
  std::string out;
  for (int k = p.degree(); k >= 0; --k) {
    const GaussianRational c = p.coeff(k);
    if (c.is_zero()) continue;
    std::string cs = to_string(c);
    bool neg = false;
    if (c.im == 0 && c.re < 0) {
      neg = true;
      cs = to_string(rational(-c.re));
    }
    if (!out.empty()) out += neg ? " - " : " + ";
    else if (neg) out += "-";
    const bool unit = cs == "1";
    if (k == 0) out += cs;
    else {
      if (!unit) out += cs + "*";
      out += k == 1 ? "z" : "z^" + std::to_string(k);
    }
  }
  return out;
}

}  // namespace kmsdyn
