#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "kmsdyn/error.hpp"

namespace kmsdyn {

using rational = boost::multiprecision::cpp_rational;

/// Exact a + b i with a, b rational.
struct GaussianRational {
  rational re{0};
  rational im{0};

  GaussianRational() = default;
  GaussianRational(rational r, rational i = 0) : re(std::move(r)), im(std::move(i)) {}
  GaussianRational(long long r) : re(r), im(0) {}

  static GaussianRational i() { return {0, 1}; }

  bool is_zero() const { return re == 0 && im == 0; }

  GaussianRational conj() const { return {re, -im}; }
  rational norm() const { return re * re + im * im; }

  friend GaussianRational operator+(const GaussianRational& a, const GaussianRational& b) {
    return {a.re + b.re, a.im + b.im};
  }
  friend GaussianRational operator-(const GaussianRational& a, const GaussianRational& b) {
    return {a.re - b.re, a.im - b.im};
  }
  friend GaussianRational operator-(const GaussianRational& a) { return {-a.re, -a.im}; }
  friend GaussianRational operator*(const GaussianRational& a, const GaussianRational& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
  }
  friend GaussianRational operator/(const GaussianRational& a, const GaussianRational& b) {
    const rational n = b.norm();
    if (n == 0) throw Error(ErrorKind::DivisionByZeroPolynomial, "division by the zero constant");
    const GaussianRational t = a * b.conj();
    return {t.re / n, t.im / n};
  }
  GaussianRational& operator+=(const GaussianRational& o) { return *this = *this + o; }
  GaussianRational& operator-=(const GaussianRational& o) { return *this = *this - o; }
  GaussianRational& operator*=(const GaussianRational& o) { return *this = *this * o; }

  friend bool operator==(const GaussianRational& a, const GaussianRational& b) {
    return a.re == b.re && a.im == b.im;
  }

  std::complex<double> to_complex() const {
    return {static_cast<double>(re), static_cast<double>(im)};
  }
};

inline std::string to_string(const rational& q) { return q.str(); }

inline std::string to_string(const GaussianRational& g) {
  if (g.im == 0) return to_string(g.re);
  if (g.re == 0) return to_string(g.im) + "*i";
  const bool neg = g.im < 0;
  return "(" + to_string(g.re) + (neg ? "-" : "+") + to_string(neg ? rational(-g.im) : g.im) + "*i)";
}

/// Polynomial over Q(i), ascending coefficients, no trailing zeros.  The zero
/// polynomial has no coefficients.
class ExactPoly {
 public:
  ExactPoly() = default;
  explicit ExactPoly(std::vector<GaussianRational> c) : c_(std::move(c)) { trim(); }
  ExactPoly(const GaussianRational& constant) : c_{constant} { trim(); }

  static ExactPoly monomial(int degree, GaussianRational coeff = 1) {
    std::vector<GaussianRational> c(static_cast<std::size_t>(degree) + 1);
    c.back() = std::move(coeff);
    return ExactPoly(std::move(c));
  }
  static ExactPoly z() { return monomial(1); }

  bool is_zero() const { return c_.empty(); }
  /// Degree, with -1 for the zero polynomial.
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  const std::vector<GaussianRational>& coeffs() const { return c_; }
  GaussianRational coeff(int k) const {
    return (k >= 0 && k < static_cast<int>(c_.size())) ? c_[static_cast<std::size_t>(k)] : GaussianRational{};
  }
  const GaussianRational& leading() const { return c_.back(); }

  ExactPoly derivative() const {
    if (c_.size() <= 1) return {};
    std::vector<GaussianRational> d(c_.size() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = c_[k] * GaussianRational(static_cast<long long>(k));
    return ExactPoly(std::move(d));
  }

  ExactPoly monic() const {
    if (is_zero()) return {};
    const GaussianRational lead = leading();
    std::vector<GaussianRational> c = c_;
    for (auto& x : c) x = x / lead;
    return ExactPoly(std::move(c));
  }

  /// Coefficients of z^n p(1/z) for n >= degree.
  ExactPoly reversed(int n) const {
    std::vector<GaussianRational> c(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= degree(); ++k) c[static_cast<std::size_t>(n - k)] = c_[static_cast<std::size_t>(k)];
    return ExactPoly(std::move(c));
  }

  friend ExactPoly operator+(const ExactPoly& a, const ExactPoly& b) {
    std::vector<GaussianRational> c(std::max(a.c_.size(), b.c_.size()));
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (k < a.c_.size()) c[k] += a.c_[k];
      if (k < b.c_.size()) c[k] += b.c_[k];
    }
    return ExactPoly(std::move(c));
  }
  friend ExactPoly operator-(const ExactPoly& a) {
    std::vector<GaussianRational> c = a.c_;
    for (auto& x : c) x = -x;
    return ExactPoly(std::move(c));
  }
  friend ExactPoly operator-(const ExactPoly& a, const ExactPoly& b) { return a + (-b); }
  friend ExactPoly operator*(const ExactPoly& a, const ExactPoly& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<GaussianRational> c(a.c_.size() + b.c_.size() - 1);
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
    return ExactPoly(std::move(c));
  }
  friend bool operator==(const ExactPoly& a, const ExactPoly& b) { return a.c_ == b.c_; }

  /// Euclidean division; throws on a zero divisor.
  friend std::pair<ExactPoly, ExactPoly> divmod(const ExactPoly& a, const ExactPoly& b) {
    if (b.is_zero()) throw Error(ErrorKind::DivisionByZeroPolynomial, "polynomial division by zero");
    std::vector<GaussianRational> rem = a.c_;
    const int db = b.degree();
    const int dq = a.degree() - db;
    if (dq < 0) return {ExactPoly{}, a};
    std::vector<GaussianRational> q(static_cast<std::size_t>(dq) + 1);
    for (int k = dq; k >= 0; --k) {
      const GaussianRational t = rem[static_cast<std::size_t>(k + db)] / b.leading();
      q[static_cast<std::size_t>(k)] = t;
      if (t.is_zero()) continue;
      for (int j = 0; j <= db; ++j) rem[static_cast<std::size_t>(k + j)] -= t * b.c_[static_cast<std::size_t>(j)];
    }
    rem.resize(static_cast<std::size_t>(db));
    return {ExactPoly(std::move(q)), ExactPoly(std::move(rem))};
  }

  friend ExactPoly operator/(const ExactPoly& a, const ExactPoly& b) { return divmod(a, b).first; }

  /// Monic greatest common divisor; gcd(0, 0) = 0.
  friend ExactPoly gcd(ExactPoly a, ExactPoly b) {
    while (!b.is_zero()) {
      ExactPoly r = divmod(a, b).second;
      a = std::move(b);
      b = std::move(r);
    }
    return a.monic();
  }

  std::vector<std::complex<double>> to_complex() const {
    std::vector<std::complex<double>> out;
    out.reserve(c_.size());
    for (const auto& x : c_) out.push_back(x.to_complex());
    return out;
  }

 private:
  void trim() {
    while (!c_.empty() && c_.back().is_zero()) c_.pop_back();
  }

  std::vector<GaussianRational> c_;
};

/// Yun's square-free decomposition: p = lc * prod_k s_k^k with the s_k monic,
/// square-free and pairwise coprime.  Entry k-1 of the result is s_k (possibly 1).
inline std::vector<ExactPoly> squarefree_decomposition(const ExactPoly& p) {
  std::vector<ExactPoly> out;
  if (p.degree() < 1) return out;
  const ExactPoly dp = p.derivative();
  ExactPoly a = gcd(p, dp);
  ExactPoly b = p / a;
  ExactPoly c = dp / a;
  ExactPoly d = c - b.derivative();
  while (b.degree() > 0) {
    ExactPoly s = gcd(b, d);
    out.push_back(s);
    b = b / s;
    c = d / s;
    d = c - b.derivative();
  }
  while (!out.empty() && out.back().degree() == 0) out.pop_back();
  return out;
}

}  // namespace kmsdyn
