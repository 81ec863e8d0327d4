#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "kmsdyn/cluster.hpp"
#include "kmsdyn/config.hpp"
#include "kmsdyn/error.hpp"
#include "kmsdyn/projective.hpp"
#include "kmsdyn/ratmap.hpp"

namespace kmsdyn {

template <class Point>
struct Atom {
  Point point;
  double weight = 0.0;
};

/// Finite sum of weighted Dirac masses.  Positive measures reject negative
/// weights and drop zero ones; signed measures keep any nonzero weight.
/// Construction merges atoms closer than the tolerance.
template <class Point, bool Signed = false>
class BasicAtomicMeasure {
 public:
  using point_type = Point;

  BasicAtomicMeasure() = default;

  BasicAtomicMeasure(std::vector<Point> pts, std::vector<double> w, double tol = kDefaultPointTol,
                     MergeRepresentative rep = MergeRepresentative::WeightedMean) {
    if (pts.size() != w.size()) throw Error(ErrorKind::InvalidArgument, "points and weights differ in length");
    if constexpr (!Signed) {
      for (double x : w)
        if (x < 0.0 || !std::isfinite(x)) throw Error(ErrorKind::InvalidArgument, "negative or non-finite weight");
    }
    if (Signed) rep = MergeRepresentative::First;
    merge_weighted(pts, w, tol, rep);
    atoms_.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (w[i] != 0.0) atoms_.push_back({pts[i], w[i]});
  }

  static BasicAtomicMeasure dirac(const Point& p, double w = 1.0) {
    BasicAtomicMeasure m;
    if (w != 0.0) m.atoms_.push_back({p, w});
    return m;
  }

  const std::vector<Atom<Point>>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }

  double total_mass() const {
    double t = 0.0;
    for (const auto& a : atoms_) t += a.weight;
    return t;
  }

  /// Summed weight of atoms within `tol` of p.
  double mass_at(const Point& p, double tol = kDefaultPointTol) const {
    double t = 0.0;
    for (const auto& a : atoms_)
      if (distance(a.point, p) <= tol) t += a.weight;
    return t;
  }

  BasicAtomicMeasure scaled(double c) const {
    if constexpr (!Signed) {
      if (c < 0.0) throw Error(ErrorKind::InvalidArgument, "negative scale for a positive measure");
    }
    BasicAtomicMeasure m;
    if (c == 0.0) return m;
    m.atoms_ = atoms_;
    for (auto& a : m.atoms_) a.weight *= c;
    return m;
  }

  /// Sum of two measures, merged at `tol`.
  friend BasicAtomicMeasure add(const BasicAtomicMeasure& a, const BasicAtomicMeasure& b,
                                double tol = kDefaultPointTol) {
    std::vector<Point> pts;
    std::vector<double> w;
    for (const auto* m : {&a, &b})
      for (const auto& x : m->atoms_) {
        pts.push_back(x.point);
        w.push_back(x.weight);
      }
    return BasicAtomicMeasure(std::move(pts), std::move(w), tol);
  }

  BasicAtomicMeasure<Point, true> as_signed() const { return BasicAtomicMeasure<Point, true>::from_atoms(atoms_); }

  /// Trusted construction from already separated atoms.
  static BasicAtomicMeasure from_atoms(std::vector<Atom<Point>> atoms) {
    BasicAtomicMeasure m;
    m.atoms_ = std::move(atoms);
    return m;
  }

 private:
  std::vector<Atom<Point>> atoms_;
};

template <class Point>
using AtomicMeasure = BasicAtomicMeasure<Point, false>;
template <class Point>
using SignedAtomicMeasure = BasicAtomicMeasure<Point, true>;

using SphereMeasure = AtomicMeasure<SpherePoint>;
using PlaneMeasure = AtomicMeasure<PlanePoint>;

template <class Point, bool S, class F>
double integrate(const BasicAtomicMeasure<Point, S>& mu, F&& f) {
  double t = 0.0;
  for (const auto& a : mu.atoms()) t += a.weight * f(a.point);
  return t;
}

/// Monomials in embedding coordinates up to a total degree.  On the sphere
/// the coordinates are the S^2 embedding; in the plane they are (x, y)
/// restricted to a box, or x alone for one-dimensional systems.
class TestFunctionLibrary {
 public:
  using Exponent = std::array<int, 3>;

  /// All xi^a of total degree <= d; sup over S^2 of |xi^a| is
  /// sqrt(prod a_i^a_i / |a|^|a|).
  static TestFunctionLibrary sphere(int degree = 4) {
    TestFunctionLibrary lib;
    for (int n = 0; n <= degree; ++n)
      for (int a = n; a >= 0; --a)
        for (int b = n - a; b >= 0; --b) {
          const int c = n - a - b;
          double s = 1.0;
          if (n > 0) {
            double lg = 0.0;
            for (int e : {a, b, c})
              if (e > 0) lg += e * std::log(static_cast<double>(e));
            lg -= n * std::log(static_cast<double>(n));
            s = std::exp(0.5 * lg);
          }
          lib.add({a, b, c}, s);
        }
    return lib;
  }

  /// x^a y^b with a + b <= d (b = 0 when dim == 1), sup over the box.
  static TestFunctionLibrary plane(std::array<double, 4> box, int dim, int degree = 4) {
    TestFunctionLibrary lib;
    const double mx = std::max(std::abs(box[0]), std::abs(box[1]));
    const double my = std::max(std::abs(box[2]), std::abs(box[3]));
    for (int n = 0; n <= degree; ++n)
      for (int a = n; a >= 0; --a) {
        const int b = n - a;
        if (dim == 1 && b > 0) continue;
        double s = std::pow(mx, a) * std::pow(my, b);
        if (s == 0.0) s = 1.0;
        lib.add({a, b, 0}, s);
      }
    return lib;
  }

  std::size_t size() const { return exps_.size(); }
  const Exponent& exponent(std::size_t i) const { return exps_[i]; }
  double sup_norm(std::size_t i) const { return sup_[i]; }
  /// Largest sup-norm in the family.
  double norm() const { return *std::max_element(sup_.begin(), sup_.end()); }

  std::string name(std::size_t i) const {
    static const char* v[3] = {"x", "y", "z"};
    std::string s;
    for (int k = 0; k < 3; ++k) {
      if (exps_[i][k] == 0) continue;
      if (!s.empty()) s += "*";
      s += v[k];
      if (exps_[i][k] > 1) s += "^" + std::to_string(exps_[i][k]);
    }
    return s.empty() ? "1" : s;
  }

  template <class Point>
  void eval(const Point& p, std::span<double> out) const {
    const auto x = embedding(p);
    std::array<std::array<double, 9>, 3> pw{};
    for (int k = 0; k < 3; ++k) {
      pw[k][0] = 1.0;
      for (int j = 1; j <= max_deg_ && j < 9; ++j) pw[k][j] = pw[k][j - 1] * x[k];
    }
    for (std::size_t i = 0; i < exps_.size(); ++i)
      out[i] = pw[0][exps_[i][0]] * pw[1][exps_[i][1]] * pw[2][exps_[i][2]];
  }

  template <class Point>
  std::vector<double> values(const Point& p) const {
    std::vector<double> v(size());
    eval(p, v);
    return v;
  }

 private:
  void add(Exponent e, double s) {
    if (e[0] + e[1] + e[2] > 8) throw Error(ErrorKind::InvalidArgument, "test library degree above 8");
    max_deg_ = std::max(max_deg_, e[0] + e[1] + e[2]);
    exps_.push_back(e);
    sup_.push_back(s);
  }

  std::vector<Exponent> exps_;
  std::vector<double> sup_;
  int max_deg_ = 0;
};

/// Integrals of every library function, optionally multiplied by `weight(x)`.
template <class Point, bool S, class W>
std::vector<double> integrate_library(const BasicAtomicMeasure<Point, S>& mu, const TestFunctionLibrary& lib,
                                      W&& weight) {
  std::vector<double> acc(lib.size(), 0.0), v(lib.size());
  for (const auto& a : mu.atoms()) {
    const double c = a.weight * weight(a.point);
    if (c == 0.0) continue;
    lib.eval(a.point, v);
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += c * v[i];
  }
  return acc;
}

template <class Point, bool S>
std::vector<double> integrate_library(const BasicAtomicMeasure<Point, S>& mu, const TestFunctionLibrary& lib) {
  return integrate_library(mu, lib, [](const Point&) { return 1.0; });
}

/// max over the library of |int f dmu - int f dnu| / sup|f|.
template <class Point, bool S1, bool S2>
double weak_star_distance(const BasicAtomicMeasure<Point, S1>& mu, const BasicAtomicMeasure<Point, S2>& nu,
                          const TestFunctionLibrary& lib) {
  const auto a = integrate_library(mu, lib);
  const auto b = integrate_library(nu, lib);
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]) / lib.sup_norm(i));
  return d;
}

/// A system whose transfer operator pulls a Dirac mass at y back to the
/// set fibre(y), each point carrying its multiplicity e.
template <class S>
concept TransferSystem = requires(const S& s, const typename S::point_type& p) {
  { s.fibre(p) } -> std::same_as<std::vector<FibrePoint<typename S::point_type>>>;
  { s.degree() } -> std::convertible_to<int>;
  { s.tolerance() } -> std::convertible_to<double>;
};

/// R viewed as a transfer system: fibre(y) = R^{-1}(y).
class RationalSystem {
 public:
  using point_type = SpherePoint;
  explicit RationalSystem(const RationalMap& r, double tol = kDefaultPointTol) : r_(&r), tol_(tol) {}
  std::vector<FibrePoint<SpherePoint>> fibre(const SpherePoint& y) const { return preimages(*r_, y, tol_); }
  int degree() const { return r_->degree(); }
  double tolerance() const { return tol_; }
  const RationalMap& map() const { return *r_; }

 private:
  const RationalMap* r_;
  double tol_;
};

enum class PullbackWeighting {
  Set,    // F: every distinct preimage once
  Index,  // G*: preimage x weighted by e(x)
};

/// Linear extension of delta_y -> sum_{x in fibre(y)} c(x) delta_x.
template <TransferSystem Sys, bool S>
BasicAtomicMeasure<typename Sys::point_type, S> pullback(const Sys& sys,
                                                         const BasicAtomicMeasure<typename Sys::point_type, S>& mu,
                                                         PullbackWeighting mode, double scale = 1.0,
                                                         std::size_t atom_budget = default_atom_budget()) {
  using Point = typename Sys::point_type;
  std::vector<Point> pts;
  std::vector<double> w;
  for (const auto& a : mu.atoms()) {
    for (const auto& f : sys.fibre(a.point)) {
      pts.push_back(f.point);
      w.push_back(scale * a.weight * (mode == PullbackWeighting::Index ? f.multiplicity : 1));
    }
    if (pts.size() > atom_budget)
      throw Error(ErrorKind::AtomBudgetExceeded,
                  "pullback needs more than " + std::to_string(atom_budget) + " atoms");
  }
  return BasicAtomicMeasure<Point, S>(std::move(pts), std::move(w), sys.tolerance());
}

/// f~(y): sum of f over the distinct points of fibre(y).
template <TransferSystem Sys, class F>
double tilde(const Sys& sys, F&& f, const typename Sys::point_type& y) {
  double t = 0.0;
  for (const auto& x : sys.fibre(y)) t += f(x.point);
  return t;
}

template <TransferSystem Sys, bool S>
BasicAtomicMeasure<typename Sys::point_type, S> apply_F_beta(const Sys& sys,
                                                             const BasicAtomicMeasure<typename Sys::point_type, S>& mu,
                                                             double beta,
                                                             std::size_t atom_budget = default_atom_budget()) {
  if (!(beta >= 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be nonnegative");
  return pullback(sys, mu, PullbackWeighting::Set, std::exp(-beta), atom_budget);
}

// Rational-map spellings.

template <class F>
double tilde(const RationalMap& r, F&& f, const SpherePoint& y, double tol = kDefaultPointTol) {
  return tilde(RationalSystem(r, tol), std::forward<F>(f), y);
}

inline SphereMeasure pullback_F(const RationalMap& r, const SphereMeasure& mu,
                                std::size_t atom_budget = default_atom_budget(), double tol = kDefaultPointTol) {
  return pullback(RationalSystem(r, tol), mu, PullbackWeighting::Set, 1.0, atom_budget);
}

inline SphereMeasure pullback_G(const RationalMap& r, const SphereMeasure& mu,
                                std::size_t atom_budget = default_atom_budget(), double tol = kDefaultPointTol) {
  return pullback(RationalSystem(r, tol), mu, PullbackWeighting::Index, 1.0, atom_budget);
}

inline SphereMeasure apply_F_beta(const RationalMap& r, const SphereMeasure& mu, double beta,
                                  std::size_t atom_budget = default_atom_budget(), double tol = kDefaultPointTol) {
  return apply_F_beta(RationalSystem(r, tol), mu, beta, atom_budget);
}

template <class Point>
struct TraceDecomposition {
  SignedAtomicMeasure<Point> finite_part;
  AtomicMeasure<Point> infinite_part;
  /// Library distance between mu and finite_part + infinite_part.
  double residual = 0.0;
  /// Mass of negative atoms that were dropped as rounding noise.
  double clipped = 0.0;
};

/// mu = sum_{n < n_max} F_beta^n(mu_0) + F_beta^{n_max}(mu) with
/// mu_0 = mu - F_beta(mu); the first sum tends to the finite-type part and
/// the second to the infinite-type part as n_max grows.
template <TransferSystem Sys>
TraceDecomposition<typename Sys::point_type> decompose_trace(const Sys& sys,
                                                             const AtomicMeasure<typename Sys::point_type>& mu,
                                                             double beta, int n_max, const TestFunctionLibrary& lib,
                                                             std::size_t atom_budget = default_atom_budget()) {
  using Point = typename Sys::point_type;
  if (n_max < 0) throw Error(ErrorKind::InvalidArgument, "n_max must be nonnegative");
  const auto fmu = apply_F_beta(sys, mu, beta, atom_budget);

  std::vector<Point> pts;
  std::vector<double> w;
  for (const auto& a : mu.atoms()) {
    pts.push_back(a.point);
    w.push_back(a.weight);
  }
  for (const auto& a : fmu.atoms()) {
    pts.push_back(a.point);
    w.push_back(-a.weight);
  }
  merge_weighted(pts, w, sys.tolerance(), MergeRepresentative::First);

  TraceDecomposition<Point> out;
  std::vector<Atom<Point>> mu0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (w[i] < -1e-6)
      throw Error(ErrorKind::NotSubinvariant,
                  "mu - F_beta(mu) has an atom of weight " + std::to_string(w[i]));
    if (std::abs(w[i]) < 1e-9) {
      if (w[i] < 0.0) out.clipped -= w[i];
      continue;
    }
    mu0.push_back({pts[i], w[i]});
  }

  auto term = SignedAtomicMeasure<Point>::from_atoms(std::move(mu0));
  SignedAtomicMeasure<Point> finite;
  for (int n = 0; n < n_max; ++n) {
    finite = add(finite, term, sys.tolerance());
    if (n + 1 < n_max) term = apply_F_beta(sys, term, beta, atom_budget);
  }
  AtomicMeasure<Point> infinite = mu;
  for (int n = 0; n < n_max; ++n) infinite = apply_F_beta(sys, infinite, beta, atom_budget);

  out.residual = weak_star_distance(mu, add(finite, infinite.as_signed(), sys.tolerance()), lib);
  out.finite_part = std::move(finite);
  out.infinite_part = std::move(infinite);
  return out;
}

inline TraceDecomposition<SpherePoint> decompose_trace(const RationalMap& r, const SphereMeasure& mu, double beta,
                                                       int n_max, std::size_t atom_budget = default_atom_budget()) {
  return decompose_trace(RationalSystem(r), mu, beta, n_max, TestFunctionLibrary::sphere(), atom_budget);
}

}  // namespace kmsdyn
