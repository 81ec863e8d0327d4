#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "kmsdyn/error.hpp"

namespace kmsdyn {

using complex = std::complex<double>;

/// Relative noise floor used when deciding whether a Taylor coefficient
/// vanishes at a root.
inline constexpr double kMultiplicityNoise = 1e-7;

/// Dense polynomial with complex coefficients in ascending degree.
class Poly {
 public:
  Poly() = default;
  explicit Poly(std::vector<complex> c) : c_(std::move(c)) { trim(); }
  Poly(std::initializer_list<complex> c) : c_(c) { trim(); }

  /// prod (z - r_i).
  static Poly from_roots(const std::vector<complex>& roots) {
    std::vector<complex> c{1.0};
    for (const complex& r : roots) {
      std::vector<complex> n(c.size() + 1);
      for (std::size_t k = 0; k < c.size(); ++k) {
        n[k + 1] += c[k];
        n[k] -= r * c[k];
      }
      c = std::move(n);
    }
    return Poly(std::move(c));
  }

  bool is_zero() const { return c_.empty(); }
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  const std::vector<complex>& coeffs() const { return c_; }
  complex leading() const { return c_.empty() ? complex{} : c_.back(); }

  complex operator()(complex z) const {
    complex acc{};
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
    return acc;
  }

  /// sum |a_k| |z|^k: the scale against which |p(z)| is compared.
  double scale(complex z) const {
    const double r = std::abs(z);
    double acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * r + std::abs(*it);
    return acc;
  }

  /// Taylor coefficients p^{(k)}(c)/k!, k = 0..degree.
  std::vector<complex> taylor(complex c) const { return shift(c_, c); }

  /// Same expansion applied to |a_k| at |c|; bounds rounding noise in `taylor`.
  std::vector<double> taylor_scale(complex c) const {
    std::vector<complex> a(c_.size());
    for (std::size_t k = 0; k < c_.size(); ++k) a[k] = std::abs(c_[k]);
    const auto t = shift(a, std::abs(c));
    std::vector<double> out(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) out[k] = t[k].real();
    return out;
  }

  friend bool operator==(const Poly&, const Poly&) = default;

 private:
  static std::vector<complex> shift(std::vector<complex> a, complex c) {
    const std::size_t n = a.size();
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = n - 1; j > k; --j) a[j - 1] += c * a[j];
    return a;
  }

  void trim() {
    while (!c_.empty() && c_.back() == complex(0.0)) c_.pop_back();
  }

  std::vector<complex> c_;
};

inline Poly derivative(const Poly& p) {
  const auto& c = p.coeffs();
  if (c.size() <= 1) return {};
  std::vector<complex> d(c.size() - 1);
  for (std::size_t k = 1; k < c.size(); ++k) d[k - 1] = c[k] * static_cast<double>(k);
  return Poly(std::move(d));
}

struct Root {
  complex value;
  int multiplicity = 1;
};

struct RootOptions {
  double tol = 1e-10;
  int max_iterations = 200;
  /// Skip multiple-root detection; used for inputs known to be square-free.
  bool assume_simple = false;
};

/// Smallest k >= 1 whose Taylor coefficient at r rises above the noise floor.
inline int multiplicity_of_root(const Poly& p, complex r, double tol = 1e-8) {
  if (p.degree() < 1) throw Error(ErrorKind::RootNotARoot, "constant polynomial has no roots");
  if (std::abs(p(r)) > tol * std::max(p.scale(r), 1e-300))
    throw Error(ErrorKind::RootNotARoot, "|p(r)| exceeds tolerance");
  const auto t = p.taylor(r);
  const auto s = p.taylor_scale(r);
  for (std::size_t k = 1; k < t.size(); ++k)
    if (std::abs(t[k]) > kMultiplicityNoise * s[k]) return static_cast<int>(k);
  return p.degree();
}

namespace detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Aberth-Ehrlich simultaneous iteration (Gauss-Seidel sweep).  Coefficient
/// c[0] must be nonzero.
inline std::vector<complex> aberth(const Poly& p, int max_iterations) {
  const int d = p.degree();
  const auto& c = p.coeffs();
  const Poly dp = derivative(p);

  // Start on a circle whose radius is the geometric mean of the root moduli.
  const double radius = std::pow(std::abs(c.front() / c.back()), 1.0 / d);
  std::vector<complex> z(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / d + 0.4;
    z[static_cast<std::size_t>(k)] = std::polar(radius * (1.0 + 0.01 * k / d), theta);
  }

  std::vector<bool> done(z.size(), false);
  for (int it = 0; it < max_iterations; ++it) {
    bool all_done = true;
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (done[i]) continue;
      const complex pv = p(z[i]);
      if (std::abs(pv) <= 4.0 * kEps * p.scale(z[i])) {
        done[i] = true;
        continue;
      }
      all_done = false;
      const complex ratio = pv / dp(z[i]);
      complex s{};
      for (std::size_t j = 0; j < z.size(); ++j)
        if (j != i) s += 1.0 / (z[i] - z[j]);
      complex step = ratio / (1.0 - ratio * s);
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag()))
        step = complex(1e-3, 1e-3) * (1.0 + std::abs(z[i]));
      z[i] -= step;
      if (std::abs(step) <= 2.0 * kEps * std::abs(z[i])) done[i] = true;
    }
    if (all_done) break;
  }
  for (const complex& r : z) {
    if (!std::isfinite(r.real()) || !std::isfinite(r.imag()) ||
        std::abs(p(r)) > 1e-6 * p.scale(r))
      throw Error(ErrorKind::NonConvergence,
                  "root iteration did not converge for degree " + std::to_string(d));
  }
  return z;
}

struct RootCluster {
  std::vector<complex> members;
  complex center;
};

/// Is this group of approximations consistent with a single root of
/// multiplicity = group size?  The spread must be explainable by rounding
/// (|T_m| delta^m within backward error) and the lower Taylor coefficients
/// must vanish at the centre to the noise floor.
/// Newton on p^{(m-1)}, for which an m-fold root of p is simple.
inline complex refine_multiple_root(const Poly& p, complex start, int m, int steps = 4) {
  Poly f = p;
  for (int k = 1; k < m; ++k) f = derivative(f);
  const Poly df = derivative(f);
  complex r = start;
  for (int it = 0; it < steps; ++it) {
    const complex dv = df(r);
    if (dv == complex(0.0)) break;
    const complex next = r - f(r) / dv;
    if (!std::isfinite(next.real()) || !std::isfinite(next.imag())) break;
    r = next;
  }
  return r;
}

inline bool consistent_multiple_root(const Poly& p, RootCluster& cl) {
  const std::size_t m = cl.members.size();
  cl.center = refine_multiple_root(p, cl.center, static_cast<int>(m));
  const auto t = p.taylor(cl.center);
  const auto s = p.taylor_scale(cl.center);
  if (m >= t.size()) return false;
  const double tm = std::abs(t[m]);
  if (tm == 0.0) return false;
  const double allowed = std::pow(1e4 * kEps * s[0] / tm, 1.0 / static_cast<double>(m));
  for (const complex& r : cl.members)
    if (std::abs(r - cl.center) > allowed) return false;
  for (std::size_t k = 0; k < m; ++k)
    if (std::abs(t[k]) > kMultiplicityNoise * s[k]) return false;
  return true;
}

inline complex mean(const std::vector<complex>& v) {
  complex acc{};
  for (const complex& x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace detail

/// All roots of p with multiplicities; the multiplicities sum to deg p.
/// Output is sorted by (re, im).
inline std::vector<Root> roots(const Poly& p, const RootOptions& opt = {}) {
  if (p.degree() < 1) throw Error(ErrorKind::InvalidArgument, "roots() needs degree >= 1");
  std::vector<Root> out;

  // Exact zero low-order coefficients are roots at the origin.
  const auto& c = p.coeffs();
  std::size_t zeros = 0;
  while (c[zeros] == complex(0.0)) ++zeros;
  if (zeros > 0) out.push_back({0.0, static_cast<int>(zeros)});
  const Poly q(std::vector<complex>(c.begin() + static_cast<std::ptrdiff_t>(zeros), c.end()));

  if (q.degree() == 1) {
    out.push_back({-q.coeffs()[0] / q.coeffs()[1], 1});
  } else if (q.degree() > 1) {
    const auto approx = detail::aberth(q, opt.max_iterations);

    std::vector<detail::RootCluster> clusters;
    for (const complex& r : approx) clusters.push_back({{r}, r});

    // Agglomerate nearest clusters while the union still looks like one root.
    auto close = [&](const detail::RootCluster& a, const detail::RootCluster& b) {
      return std::abs(a.center - b.center) <= opt.tol * std::max(1.0, std::abs(a.center));
    };
    bool merged = true;
    while (merged && clusters.size() > 1) {
      merged = false;
      std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> pairs;
      for (std::size_t i = 0; i < clusters.size(); ++i)
        for (std::size_t j = i + 1; j < clusters.size(); ++j)
          pairs.push_back({std::abs(clusters[i].center - clusters[j].center), {i, j}});
      std::sort(pairs.begin(), pairs.end());
      for (const auto& [dist, ij] : pairs) {
        const auto [i, j] = ij;
        detail::RootCluster u;
        u.members = clusters[i].members;
        u.members.insert(u.members.end(), clusters[j].members.begin(), clusters[j].members.end());
        u.center = detail::mean(u.members);
        if (close(clusters[i], clusters[j]) ||
            (!opt.assume_simple && detail::consistent_multiple_root(q, u))) {
          clusters[i] = std::move(u);
          clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
          break;
        }
      }
    }

    for (auto& cl : clusters) {
      const int m = static_cast<int>(cl.members.size());
      complex r = cl.center;
      if (m == 1) {
        const complex polished = detail::refine_multiple_root(q, r, 1, 3);
        if (std::abs(q(polished)) <= std::abs(q(r))) r = polished;
      }
      out.push_back({r, m});
    }
  }

  std::sort(out.begin(), out.end(), [](const Root& a, const Root& b) {
    if (a.value.real() != b.value.real()) return a.value.real() < b.value.real();
    return a.value.imag() < b.value.imag();
  });
  return out;
}

inline std::vector<Root> roots(const Poly& p, double tol) {
  RootOptions o;
  o.tol = tol;
  return roots(p, o);
}

}  // namespace kmsdyn
