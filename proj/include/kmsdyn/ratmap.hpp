#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kmsdyn/cluster.hpp"
#include "kmsdyn/config.hpp"
#include "kmsdyn/error.hpp"
#include "kmsdyn/exact.hpp"
#include "kmsdyn/poly.hpp"
#include "kmsdyn/projective.hpp"

namespace kmsdyn {

/// A point of a fibre R^{-1}(y) together with its local degree e(x).
template <class Point>
struct FibrePoint {
  Point point;
  int multiplicity = 1;
};

/// R = P/Q of degree N = max(deg P, deg Q) >= 2 with P, Q coprime.
///
/// Coefficients are kept exactly when the map came from exact input, so that
/// coprimality and the multiplicity structure of the critical points are
/// decided in exact arithmetic.  Evaluation always uses the floating copy.
class RationalMap {
 public:
  RationalMap(ExactPoly p, ExactPoly q) : exact_{{std::move(p), std::move(q)}} {
    const auto& [P, Q] = *exact_;
    if (Q.is_zero()) throw Error(ErrorKind::DivisionByZeroPolynomial, "denominator is the zero polynomial");
    if (gcd(P, Q).degree() > 0)
      throw Error(ErrorKind::InvalidArgument, "numerator and denominator share a common factor");
    init(P.to_complex(), Q.to_complex());
  }

  /// Floating-point coefficients only; coprimality is checked with a tolerance.
  static RationalMap from_coefficients(std::vector<complex> p, std::vector<complex> q) {
    RationalMap r;
    r.init(std::move(p), std::move(q));
    const Poly& small = r.p_.degree() <= r.q_.degree() ? r.p_ : r.q_;
    const Poly& other = r.p_.degree() <= r.q_.degree() ? r.q_ : r.p_;
    if (small.degree() >= 1) {
      for (const auto& root : roots(small))
        if (std::abs(other(root.value)) <= 1e-10 * other.scale(root.value))
          throw Error(ErrorKind::InvalidArgument, "numerator and denominator share a root");
    }
    return r;
  }

  int degree() const { return n_; }
  const Poly& numerator() const { return p_; }
  const Poly& denominator() const { return q_; }
  bool is_exact() const { return exact_.has_value(); }
  const ExactPoly& exact_numerator() const { return exact_->first; }
  const ExactPoly& exact_denominator() const { return exact_->second; }

  /// [P(z,w) : Q(z,w)] with P, Q homogenized to degree N.
  SpherePoint operator()(const SpherePoint& x) const {
    return SpherePoint::homogeneous(hom(p_, x), hom(q_, x));
  }

 private:
  RationalMap() = default;

  void init(std::vector<complex> p, std::vector<complex> q) {
    p_ = Poly(std::move(p));
    q_ = Poly(std::move(q));
    if (q_.is_zero()) throw Error(ErrorKind::DivisionByZeroPolynomial, "denominator is the zero polynomial");
    n_ = std::max(p_.degree(), q_.degree());
    if (n_ < 2)
      throw Error(ErrorKind::DegreeTooLow,
                  "degree " + std::to_string(std::max(n_, 0)) +
                      " < 2; rational maps are assumed to have degree at least two");
  }

  complex hom(const Poly& f, const SpherePoint& x) const {
    // Canonical points have z == 1 or w == 1 exactly.
    const auto& c = f.coeffs();
    complex acc{};
    if (x.w() == complex(1.0)) {
      for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x.z() + *it;
      return acc;
    }
    // z == 1: sum c_k w^{N-k}.
    for (int k = 0; k <= n_; ++k) acc = acc * x.w() + (k < static_cast<int>(c.size()) ? c[static_cast<std::size_t>(k)] : complex{});
    return acc;
  }

  std::optional<std::pair<ExactPoly, ExactPoly>> exact_;
  Poly p_, q_;
  int n_ = 0;
};

inline SpherePoint evaluate(const RationalMap& r, const SpherePoint& x) { return r(x); }

namespace detail {

inline bool fibre_less(const SpherePoint& a, const SpherePoint& b) {
  if (a.is_infinity() != b.is_infinity()) return b.is_infinity();
  const complex x = a.affine(), y = b.affine();
  if (x.real() != y.real()) return x.real() < y.real();
  return x.imag() < y.imag();
}

}  // namespace detail

/// Distinct solutions of R(x) = y with local degrees; the degrees sum to N.
inline std::vector<FibrePoint<SpherePoint>> preimages(const RationalMap& r, const SpherePoint& y,
                                                      double tol = kDefaultPointTol) {
  const int n = r.degree();
  const auto& pc = r.numerator().coeffs();
  const auto& qc = r.denominator().coeffs();
  auto coeff = [](const std::vector<complex>& c, int k) {
    return k < static_cast<int>(c.size()) ? c[static_cast<std::size_t>(k)] : complex{};
  };

  // H(z, 1) = w_y P(z) - z_y Q(z); coefficients within rounding of zero are zero.
  constexpr double eps = std::numeric_limits<double>::epsilon();
  std::vector<complex> h(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    const complex a = coeff(pc, k), b = coeff(qc, k);
    const complex v = y.w() * a - y.z() * b;
    const double bound = 8.0 * eps * (std::abs(y.w()) * std::abs(a) + std::abs(y.z()) * std::abs(b));
    h[static_cast<std::size_t>(k)] = std::abs(v) <= bound ? complex{} : v;
  }
  const Poly hp(h);

  std::vector<SpherePoint> pts;
  std::vector<int> mult;
  if (hp.degree() >= 1) {
    for (const auto& root : roots(hp)) {
      pts.push_back(from_affine(root.value));
      mult.push_back(root.multiplicity);
    }
  }
  const int at_infinity = n - std::max(hp.degree(), 0);
  if (at_infinity > 0) {
    pts.push_back(infinity());
    mult.push_back(at_infinity);
  }

  const auto ids = greedy_cluster_ids(std::span<const SpherePoint>(pts), tol);
  std::vector<FibrePoint<SpherePoint>> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (ids[i] >= out.size()) out.push_back({pts[i], 0});
    out[ids[i]].multiplicity += mult[i];
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return detail::fibre_less(a.point, b.point); });
  return out;
}

struct BranchPoint {
  SpherePoint point;
  int index = 2;
};

struct BranchData {
  std::vector<BranchPoint> branch_points;
  std::vector<SpherePoint> branch_values;
};

namespace detail {

/// Leading run of zero coefficients (exact) of the Wronskian of the map
/// conjugated by z -> 1/z; gives e(inf) - 1.
inline int order_at_zero_exact(const ExactPoly& w) {
  int k = 0;
  while (k <= w.degree() && w.coeff(k).is_zero()) ++k;
  return k;
}

}  // namespace detail

/// Critical points with local degrees, and their images.
///
/// Affine critical points are the roots of the Wronskian P'Q - PQ' with
/// e = (multiplicity) + 1; the point at infinity is handled by conjugating
/// with z -> 1/z and examining the origin.  Each index is cross-checked
/// against the multiplicity of the point in its own fibre.
inline BranchData branch_data(const RationalMap& r, double tol = kDefaultPointTol) {
  const int n = r.degree();
  BranchData out;

  if (r.is_exact()) {
    const ExactPoly& P = r.exact_numerator();
    const ExactPoly& Q = r.exact_denominator();
    const ExactPoly w = P.derivative() * Q - P * Q.derivative();
    const auto parts = squarefree_decomposition(w);
    RootOptions simple;
    simple.assume_simple = true;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (parts[k].degree() < 1) continue;
      for (const auto& root : roots(Poly(parts[k].to_complex()), simple))
        out.branch_points.push_back({from_affine(root.value), static_cast<int>(k) + 2});
    }
    const ExactPoly Pi = Q.reversed(n);  // numerator of 1/R(1/u)
    const ExactPoly Qi = P.reversed(n);
    const int k_inf = detail::order_at_zero_exact(Pi.derivative() * Qi - Pi * Qi.derivative());
    if (k_inf > 0) out.branch_points.push_back({infinity(), k_inf + 1});
  } else {
    const Poly& P = r.numerator();
    const Poly& Q = r.denominator();
    auto wronskian = [](const Poly& a, const Poly& b) {
      const Poly da = derivative(a), db = derivative(b);
      const std::size_t len = std::max(a.coeffs().size() + db.coeffs().size(), da.coeffs().size() + b.coeffs().size());
      std::vector<complex> c(len);
      for (std::size_t i = 0; i < da.coeffs().size(); ++i)
        for (std::size_t j = 0; j < b.coeffs().size(); ++j) c[i + j] += da.coeffs()[i] * b.coeffs()[j];
      for (std::size_t i = 0; i < a.coeffs().size(); ++i)
        for (std::size_t j = 0; j < db.coeffs().size(); ++j) c[i + j] -= a.coeffs()[i] * db.coeffs()[j];
      double scale = 0.0;
      for (const auto& x : c) scale = std::max(scale, std::abs(x));
      for (auto& x : c)
        if (std::abs(x) <= 1e-13 * scale) x = 0.0;
      return Poly(std::move(c));
    };
    auto rev = [n](const Poly& f) {
      std::vector<complex> c(static_cast<std::size_t>(n) + 1);
      for (int k = 0; k <= f.degree(); ++k) c[static_cast<std::size_t>(n - k)] = f.coeffs()[static_cast<std::size_t>(k)];
      return Poly(std::move(c));
    };
    const Poly w = wronskian(P, Q);
    if (w.degree() >= 1)
      for (const auto& root : roots(w)) out.branch_points.push_back({from_affine(root.value), root.multiplicity + 1});
    const Poly wi = wronskian(rev(Q), rev(P));
    int k_inf = 0;
    while (k_inf <= wi.degree() && wi.coeffs()[static_cast<std::size_t>(k_inf)] == complex(0.0)) ++k_inf;
    if (k_inf > 0) out.branch_points.push_back({infinity(), k_inf + 1});
  }

  std::sort(out.branch_points.begin(), out.branch_points.end(),
            [](const auto& a, const auto& b) { return detail::fibre_less(a.point, b.point); });

  std::vector<SpherePoint> values;
  for (const auto& bp : out.branch_points) {
    const SpherePoint v = r(bp.point);
    values.push_back(v);
    int found = 0;
    for (const auto& f : preimages(r, v, tol))
      if (chordal_distance(f.point, bp.point) <= 1e-6) found = f.multiplicity;
    if (found != bp.index)
      throw Error(ErrorKind::InternalConsistency,
                  "branch index " + std::to_string(bp.index) + " disagrees with fibre multiplicity " +
                      std::to_string(found));
  }
  for (const auto& c : cluster(values, tol)) out.branch_values.push_back(c.representative);
  return out;
}

/// Local degree e(x); 1 away from the critical points.
inline int branch_index(const BranchData& b, const SpherePoint& x, double tol = kDefaultPointTol) {
  for (const auto& bp : b.branch_points)
    if (chordal_distance(bp.point, x) <= tol) return bp.index;
  return 1;
}

inline bool is_branch_point(const BranchData& b, const SpherePoint& x, double tol = kDefaultPointTol) {
  return branch_index(b, x, tol) > 1;
}

inline std::vector<SpherePoint> forward_orbit(const RationalMap& r, SpherePoint z, int n) {
  std::vector<SpherePoint> out{z};
  for (int k = 0; k < n; ++k) out.push_back(z = r(z));
  return out;
}

enum class ExceptionalCase { Empty, OneFixed, TwoFixed, TwoSwapped };

inline constexpr std::string_view to_string(ExceptionalCase c) {
  switch (c) {
    case ExceptionalCase::Empty: return "Empty";
    case ExceptionalCase::OneFixed: return "OneFixed";
    case ExceptionalCase::TwoFixed: return "TwoFixed";
    case ExceptionalCase::TwoSwapped: return "TwoSwapped";
  }
  return "?";
}

struct ExceptionalReport {
  std::vector<SpherePoint> points;
  ExceptionalCase case_tag = ExceptionalCase::Empty;
  /// Partition of `points` into grand-orbit classes.
  std::vector<std::vector<SpherePoint>> orbit_classes;

  bool contains(const SpherePoint& p, double tol = kDefaultPointTol) const {
    for (const auto& e : points)
      if (chordal_distance(e, p) <= tol) return true;
    return false;
  }
};

/// Points with finite backward orbit.  Such a point z has a single preimage
/// u, and u in turn has a single preimage v with v in {z, u}; this depth-two
/// certificate is complete because the exceptional set is either a fixed
/// point, two fixed points, or a 2-cycle.
inline ExceptionalReport exceptional_points(const RationalMap& r, const BranchData& b,
                                            double tol = kDefaultPointTol) {
  const int n = r.degree();
  ExceptionalReport rep;
  for (const auto& bp : b.branch_points) {
    if (bp.index != n) continue;
    const auto fz = preimages(r, bp.point, tol);
    if (fz.size() != 1) continue;
    const SpherePoint u = fz[0].point;
    const auto fu = preimages(r, u, tol);
    if (fu.size() != 1) continue;
    const SpherePoint v = fu[0].point;
    const bool closes = chordal_distance(v, bp.point) <= 1e-6 || chordal_distance(v, u) <= 1e-6;
    if (closes && !rep.contains(bp.point, 1e-6)) rep.points.push_back(bp.point);
  }

  std::sort(rep.points.begin(), rep.points.end(), detail::fibre_less);
  if (rep.points.size() > 2)
    throw Error(ErrorKind::InternalConsistency, "more than two exceptional points found");

  auto fixed = [&](const SpherePoint& p) { return chordal_distance(r(p), p) <= 1e-6; };
  if (rep.points.empty()) {
    rep.case_tag = ExceptionalCase::Empty;
  } else if (rep.points.size() == 1) {
    rep.case_tag = ExceptionalCase::OneFixed;
    rep.orbit_classes = {{rep.points[0]}};
  } else if (fixed(rep.points[0]) && fixed(rep.points[1])) {
    rep.case_tag = ExceptionalCase::TwoFixed;
    rep.orbit_classes = {{rep.points[0]}, {rep.points[1]}};
  } else {
    rep.case_tag = ExceptionalCase::TwoSwapped;
    rep.orbit_classes = {{rep.points[0], rep.points[1]}};
  }
  return rep;
}

inline ExceptionalReport exceptional_points(const RationalMap& r, double tol = kDefaultPointTol) {
  return exceptional_points(r, branch_data(r, tol), tol);
}

enum class OrbitWeighting { SetCount, IndexWeighted };

template <class Point>
struct OrbitAtom {
  Point point;
  double weight = 0.0;
};

/// Levels of the backward orbit of an anchor; level k lists R^{-k}(anchor).
struct OrbitTree {
  std::vector<std::vector<OrbitAtom<SpherePoint>>> levels;
  bool truncated = false;
  std::size_t total_atoms = 0;
};

/// SetCount: weight = number of backward paths reaching the point, i.e. the
/// atoms of F^k(delta_z).  IndexWeighted: weight = N^{-k} e(x) e(R x) ...
/// summed over paths, a probability vector on every level.
inline OrbitTree backward_orbit(const RationalMap& r, const SpherePoint& z, int depth, OrbitWeighting mode,
                                std::size_t atom_budget = default_atom_budget(), double tol = kDefaultPointTol) {
  if (depth < 0) throw Error(ErrorKind::InvalidArgument, "depth must be nonnegative");
  if (mode == OrbitWeighting::IndexWeighted && exceptional_points(r, tol).contains(z, 1e-6))
    throw Error(ErrorKind::ExceptionalSeed, "index-weighted backward orbit needs a non-exceptional seed");

  const double inv_n = 1.0 / r.degree();
  OrbitTree tree;
  tree.levels.push_back({{z, 1.0}});
  tree.total_atoms = 1;
  for (int k = 0; k < depth; ++k) {
    std::vector<SpherePoint> pts;
    std::vector<double> w;
    for (const auto& atom : tree.levels.back()) {
      for (const auto& f : preimages(r, atom.point, tol)) {
        pts.push_back(f.point);
        w.push_back(mode == OrbitWeighting::SetCount ? atom.weight : atom.weight * f.multiplicity * inv_n);
      }
    }
    merge_weighted(pts, w, tol, MergeRepresentative::First);
    if (tree.total_atoms + pts.size() > atom_budget) {
      tree.truncated = true;
      break;
    }
    tree.total_atoms += pts.size();
    std::vector<OrbitAtom<SpherePoint>> level(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) level[i] = {pts[i], w[i]};
    tree.levels.push_back(std::move(level));
  }
  return tree;
}

}  // namespace kmsdyn
