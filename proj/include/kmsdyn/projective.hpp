#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <vector>

namespace kmsdyn {

using complex = std::complex<double>;

/// Default identification tolerance for points on the sphere (chordal).
inline constexpr double kDefaultPointTol = 1e-8;

/// A point of the Riemann sphere in homogeneous coordinates [z : w].
///
/// The stored pair is canonical: whichever coordinate has the larger modulus
/// is divided out, so it is exactly 1 and the other has modulus <= 1.  Finite
/// points with |c| <= 1 are therefore stored as [c : 1] and the point at
/// infinity as [1 : 0].
class SpherePoint {
 public:
  SpherePoint() : z_(0.0), w_(1.0) {}

  /// Projective class of (z, w); the pair must not be (0, 0).
  static SpherePoint homogeneous(complex z, complex w) {
    SpherePoint p;
    p.assign(z, w);
    return p;
  }

  static SpherePoint from_affine(complex c) { return homogeneous(c, 1.0); }
  static SpherePoint infinity() { return homogeneous(1.0, 0.0); }

  complex z() const { return z_; }
  complex w() const { return w_; }

  bool is_infinity() const { return w_ == complex(0.0); }

  /// Affine coordinate z/w; only meaningful for finite points.
  complex affine() const { return w_ == complex(1.0) ? z_ : z_ / w_; }

  /// Re-applies the canonical scaling.  Idempotent bitwise.
  SpherePoint normalized() const { return homogeneous(z_, w_); }

  friend bool operator==(const SpherePoint&, const SpherePoint&) = default;

 private:
  void assign(complex z, complex w) {
    if (std::abs(z) >= std::abs(w)) {
      w_ = w / z;
      z_ = 1.0;
    } else {
      z_ = z / w;
      w_ = 1.0;
    }
  }

  complex z_;
  complex w_;
};

inline SpherePoint from_affine(complex c) { return SpherePoint::from_affine(c); }
inline SpherePoint infinity() { return SpherePoint::infinity(); }

/// 2|z_p w_q - z_q w_p| / (|p| |q|).  Equals the Euclidean distance between
/// the images on the unit sphere S^2 under `embedding`.
inline double chordal_distance(const SpherePoint& p, const SpherePoint& q) {
  const double np = std::sqrt(std::norm(p.z()) + std::norm(p.w()));
  const double nq = std::sqrt(std::norm(q.z()) + std::norm(q.w()));
  return 2.0 * std::abs(p.z() * q.w() - q.z() * p.w()) / (np * nq);
}

inline double distance(const SpherePoint& p, const SpherePoint& q) {
  return chordal_distance(p, q);
}

/// Inverse stereographic image in S^2 \subset R^3; 0 -> south pole, inf -> north.
inline std::array<double, 3> embedding(const SpherePoint& p) {
  const complex zw = p.z() * std::conj(p.w());
  const double a = std::norm(p.z());
  const double b = std::norm(p.w());
  const double s = a + b;
  return {2.0 * zw.real() / s, 2.0 * zw.imag() / s, (a - b) / s};
}

/// Inverse of `embedding` (input is projected radially onto S^2 first).
inline SpherePoint sphere_point_from_embedding(std::array<double, 3> x) {
  const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  for (auto& c : x) c /= r;
  // Use the chart away from the pole that x is close to.
  if (x[2] <= 0.0) return from_affine(complex(x[0], x[1]) / (1.0 - x[2]));
  return SpherePoint::homogeneous(1.0, complex(x[0], -x[1]) / (1.0 + x[2]));
}

/// A point of the real plane; one-dimensional systems use y = 0.
struct PlanePoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PlanePoint&, const PlanePoint&) = default;
  PlanePoint operator+(PlanePoint o) const { return {x + o.x, y + o.y}; }
  PlanePoint operator-(PlanePoint o) const { return {x - o.x, y - o.y}; }
  PlanePoint operator*(double s) const { return {x * s, y * s}; }
};

inline double distance(const PlanePoint& p, const PlanePoint& q) {
  return std::hypot(p.x - q.x, p.y - q.y);
}

inline std::array<double, 3> embedding(const PlanePoint& p) { return {p.x, p.y, 0.0}; }

inline double norm(const PlanePoint& p) { return std::hypot(p.x, p.y); }

}  // namespace kmsdyn
