#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kmsdyn/cluster.hpp"
#include "kmsdyn/config.hpp"
#include "kmsdyn/error.hpp"
#include "kmsdyn/kms.hpp"
#include "kmsdyn/measure.hpp"
#include "kmsdyn/projective.hpp"

namespace kmsdyn {

/// Images closer than this count as one point of gamma(y).
inline constexpr double kCollisionTol = 1e-9;

using Matrix2 = std::array<std::array<double, 2>, 2>;

/// y -> A y + b.  In one dimension only A[0][0] and b.x are used.
struct AffineMap {
  Matrix2 linear{{{1.0, 0.0}, {0.0, 1.0}}};
  PlanePoint offset;

  PlanePoint operator()(const PlanePoint& p) const {
    return {linear[0][0] * p.x + linear[0][1] * p.y + offset.x, linear[1][0] * p.x + linear[1][1] * p.y + offset.y};
  }

  double det() const { return linear[0][0] * linear[1][1] - linear[0][1] * linear[1][0]; }

  /// gamma^{-1}(p); the map must be invertible.
  PlanePoint inverse(const PlanePoint& p, int dim) const {
    const PlanePoint q = p - offset;
    if (dim == 1) return {q.x / linear[0][0], 0.0};
    const double d = det();
    return {(linear[1][1] * q.x - linear[0][1] * q.y) / d, (-linear[1][0] * q.x + linear[0][0] * q.y) / d};
  }

  /// Singular values (largest first).
  std::array<double, 2> singular_values(int dim) const {
    if (dim == 1) return {std::abs(linear[0][0]), std::abs(linear[0][0])};
    const double a = linear[0][0], b = linear[0][1], c = linear[1][0], d = linear[1][1];
    const double s = a * a + b * b + c * c + d * d;
    const double dt = std::abs(a * d - b * c);
    const double disc = std::sqrt(std::max(0.0, s * s / 4.0 - dt * dt));
    const double hi = std::sqrt(s / 2.0 + disc);
    return {hi, hi > 0.0 ? dt / hi : 0.0};
  }

  static AffineMap scalar(double a, double b) { return {{{{a, 0.0}, {0.0, 0.0}}}, {b, 0.0}}; }
};

/// The fixed point of g: solves (A - I) p = -b.
inline PlanePoint fixed_point(const AffineMap& g, int dim) {
  AffineMap shifted = g;
  shifted.linear[0][0] -= 1.0;
  shifted.linear[1][1] -= 1.0;
  if (dim == 1) shifted.linear[1][1] = 1.0;
  return shifted.inverse(PlanePoint{}, dim);
}

/// Rotation by `angle` about `centre`, composed after `g`.
inline AffineMap rotate_after(const AffineMap& g, double angle, const PlanePoint& centre) {
  const double c = std::cos(angle), s = std::sin(angle);
  const Matrix2 r{{{c, -s}, {s, c}}};
  AffineMap out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.linear[i][j] = r[i][0] * g.linear[0][j] + r[i][1] * g.linear[1][j];
  const PlanePoint shifted = g.offset - centre;
  out.offset = PlanePoint{r[0][0] * shifted.x + r[0][1] * shifted.y, r[1][0] * shifted.x + r[1][1] * shifted.y} +
               centre;
  return out;
}

/// f o g.
inline AffineMap compose(const AffineMap& f, const AffineMap& g) {
  AffineMap out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.linear[i][j] = f.linear[i][0] * g.linear[0][j] + f.linear[i][1] * g.linear[1][j];
  out.offset = f(g.offset);
  return out;
}

/// N >= 2 proper affine contractions of the line or the plane.  As a
/// transfer system the fibre of y is the set gamma(y) of images, each with
/// the number of maps landing there.
class IFSSystem {
 public:
  using point_type = PlanePoint;

  IFSSystem(std::vector<AffineMap> maps, int dim, std::string name = {}) : maps_(std::move(maps)), dim_(dim),
                                                                          name_(std::move(name)) {
    if (dim_ != 1 && dim_ != 2) throw Error(ErrorKind::InvalidSystem, "dimension must be 1 or 2");
    if (maps_.size() < 2) throw Error(ErrorKind::InvalidSystem, "an IFS needs at least two maps");
    c1_ = 1.0;
    c2_ = 0.0;
    for (std::size_t i = 0; i < maps_.size(); ++i) {
      auto& g = maps_[i];
      if (dim_ == 1) {
        g.linear[0][1] = g.linear[1][0] = g.linear[1][1] = 0.0;
        g.offset.y = 0.0;
      }
      const auto sv = g.singular_values(dim_);
      if (!(sv[0] < 1.0) || !(sv[1] > 0.0))
        throw Error(ErrorKind::InvalidSystem, "map " + std::to_string(i) + " is not a proper contraction");
      c1_ = std::min(c1_, sv[1]);
      c2_ = std::max(c2_, sv[0]);
    }
    for (std::size_t i = 0; i < maps_.size(); ++i)
      for (std::size_t j = i + 1; j < maps_.size(); ++j)
        if (maps_[i].linear == maps_[j].linear && maps_[i].offset == maps_[j].offset)
          throw Error(ErrorKind::InvalidSystem, "maps " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
    bounding_ball();
  }

  int degree() const { return static_cast<int>(maps_.size()); }
  double tolerance() const { return kCollisionTol; }
  int dim() const { return dim_; }
  const std::string& name() const { return name_; }
  const std::vector<AffineMap>& maps() const { return maps_; }
  const AffineMap& map(std::size_t j) const { return maps_[j]; }
  /// Contraction bounds c1 <= sigma_min, sigma_max <= c2.
  double c1() const { return c1_; }
  double c2() const { return c2_; }
  double lipschitz(std::size_t j) const { return lip_[j]; }

  /// A ball with gamma_j(ball) inside it for every j, hence containing K.
  PlanePoint hull_centre() const { return centre_; }
  double hull_radius() const { return radius_; }
  std::array<double, 4> bounding_box() const {
    return {centre_.x - radius_, centre_.x + radius_, dim_ == 1 ? 0.0 : centre_.y - radius_,
            dim_ == 1 ? 0.0 : centre_.y + radius_};
  }

  std::vector<FibrePoint<PlanePoint>> fibre(const PlanePoint& y) const {
    std::vector<PlanePoint> img;
    img.reserve(maps_.size());
    for (const auto& g : maps_) img.push_back(g(y));
    std::vector<std::size_t> reps;
    const auto ids = greedy_cluster_ids(std::span<const PlanePoint>(img), kCollisionTol, &reps);
    std::vector<FibrePoint<PlanePoint>> out(reps.size());
    for (std::size_t c = 0; c < reps.size(); ++c) out[c] = {img[reps[c]], 0};
    for (auto id : ids) ++out[id].multiplicity;
    return out;
  }

  /// Smallest word length with cells of diameter below `diameter`.
  int cover_depth(double diameter = 1e-6) const {
    if (radius_ == 0.0) return 0;
    return std::max(0, static_cast<int>(std::ceil(std::log(diameter / (2.0 * radius_)) / std::log(c2_))));
  }

  /// Whether p lies within tol of the cover of K by the cells gamma_w(ball), |w| = depth.
  bool in_cover(const PlanePoint& p, int depth, double tol = kCollisionTol) const {
    return cover_search(p, AffineMap{}, radius_, depth, tol);
  }

 private:
  void bounding_ball() {
    PlanePoint c;
    for (const auto& g : maps_) c = c + fixed_point(g, dim_);
    centre_ = c * (1.0 / static_cast<double>(maps_.size()));
    radius_ = 0.0;
    lip_.clear();
    for (const auto& g : maps_) {
      const double s = g.singular_values(dim_)[0];
      lip_.push_back(s);
      radius_ = std::max(radius_, distance(g(centre_), centre_) / (1.0 - s));
    }
    radius_ *= 1.0 + 1e-12;
  }

  // Cells gamma_w(ball) nest: gamma_{wj}(ball) lies inside gamma_w(ball).
  bool cover_search(const PlanePoint& p, const AffineMap& w, double radius, int depth, double tol) const {
    if (distance(p, w(centre_)) > radius + tol) return false;
    if (depth == 0) return true;
    for (std::size_t j = 0; j < maps_.size(); ++j)
      if (cover_search(p, compose(w, maps_[j]), radius * lip_[j], depth - 1, tol)) return true;
    return false;
  }

  std::vector<AffineMap> maps_;
  int dim_;
  std::string name_;
  double c1_ = 0.0, c2_ = 0.0;
  PlanePoint centre_;
  double radius_ = 0.0;
  std::vector<double> lip_;
};

// Presets.

inline IFSSystem tent_ifs() { return IFSSystem({AffineMap::scalar(0.5, 0.0), AffineMap::scalar(-0.5, 1.0)}, 1, "tent"); }

inline IFSSystem binary_ifs() {
  return IFSSystem({AffineMap::scalar(0.5, 0.0), AffineMap::scalar(0.5, 0.5)}, 1, "binary");
}

namespace detail {
inline std::vector<AffineMap> sierpinski_maps() {
  const double h = std::numbers::sqrt3 / 4.0;
  const Matrix2 half{{{0.5, 0.0}, {0.0, 0.5}}};
  return {AffineMap{half, {0.25, h}}, AffineMap{half, {0.0, 0.0}}, AffineMap{half, {0.5, 0.0}}};
}
}  // namespace detail

/// Vertices c1 = (1/2, sqrt3/2), c2 = (0, 0), c3 = (1, 0); gamma_i fixes c_i.
inline IFSSystem sierpinski_ifs() { return IFSSystem(detail::sierpinski_maps(), 2, "sierpinski"); }

/// gamma_2 and gamma_3 followed by rotations by -2pi/3 and +2pi/3 about the
/// centroids of their sub-triangles.
inline IFSSystem sierpinski_twisted_ifs() {
  auto m = detail::sierpinski_maps();
  const double k = std::numbers::sqrt3 / 12.0;
  m[1] = rotate_after(m[1], -2.0 * std::numbers::pi / 3.0, {0.25, k});
  m[2] = rotate_after(m[2], 2.0 * std::numbers::pi / 3.0, {0.75, k});
  return IFSSystem(std::move(m), 2, "sierpinski-twisted");
}

inline const std::vector<std::string>& ifs_preset_names() {
  static const std::vector<std::string> names{"tent", "binary", "sierpinski", "sierpinski-twisted"};
  return names;
}

inline IFSSystem ifs_preset(const std::string& name) {
  if (name == "tent") return tent_ifs();
  if (name == "binary") return binary_ifs();
  if (name == "sierpinski") return sierpinski_ifs();
  if (name == "sierpinski-twisted") return sierpinski_twisted_ifs();
  throw Error(ErrorKind::InvalidArgument, "unknown preset '" + name + "'");
}

/// {"dim": 1|2, "maps": [{"linear": a | [[a,b],[c,d]], "offset": e | [e,f]}], "name": "..."}
inline IFSSystem ifs_from_json(const nlohmann::json& j) {
  try {
    const int dim = j.value("dim", 2);
    if (!j.contains("maps") || !j["maps"].is_array()) throw Error(ErrorKind::InvalidSystem, "missing \"maps\" array");
    std::vector<AffineMap> maps;
    for (const auto& m : j["maps"]) {
      AffineMap g;
      const auto& lin = m.at("linear");
      const auto& off = m.at("offset");
      if (dim == 1) {
        const double a = lin.is_number() ? lin.get<double>() : lin.at(0).is_number() ? lin.at(0).get<double>()
                                                                                      : lin.at(0).at(0).get<double>();
        const double b = off.is_number() ? off.get<double>() : off.at(0).get<double>();
        g = AffineMap::scalar(a, b);
      } else {
        if (lin.size() != 2 || off.size() != 2) throw Error(ErrorKind::InvalidSystem, "2-D maps need 2x2 linear and 2-vector offset");
        for (int r = 0; r < 2; ++r) {
          if (lin.at(r).size() != 2) throw Error(ErrorKind::InvalidSystem, "linear part must be 2x2");
          for (int c = 0; c < 2; ++c) g.linear[r][c] = lin.at(r).at(c).get<double>();
        }
        g.offset = {off.at(0).get<double>(), off.at(1).get<double>()};
      }
      maps.push_back(g);
    }
    return IFSSystem(std::move(maps), dim, j.value("name", std::string("custom")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSystem, e.what());
  }
}

/// Parses the JSON text of a custom system.
inline IFSSystem parse_ifs_system(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::InvalidSystem, e.what());
  }
  return ifs_from_json(j);
}

namespace detail {
inline std::vector<PlanePoint> distinct(const std::vector<PlanePoint>& pts, double tol = kCollisionTol) {
  std::vector<PlanePoint> out;
  for (const auto& c : cluster(pts, tol)) out.push_back(c.representative);
  return out;
}
}  // namespace detail

// Branch structure.

struct BranchValue {
  PlanePoint y;
  /// Pairs (j, j') with gamma_j(y) = gamma_j'(y), j < j'.
  std::vector<std::pair<int, int>> pairs;
};

struct SingularPair {
  int j = 0, k = 0;
  /// true when gamma_j - gamma_k vanishes on a whole line (not a finite branch set).
  bool degenerate = false;
};

struct IFSBranchData {
  std::vector<BranchValue> branch_values;  // C(gamma)
  std::vector<PlanePoint> branch_points;   // B(gamma)
  std::vector<SingularPair> singular_pairs;
  int attractor_depth = 0;

  std::vector<PlanePoint> values() const {
    std::vector<PlanePoint> v;
    for (const auto& b : branch_values) v.push_back(b.y);
    return v;
  }
};

/// Solves gamma_j(y) = gamma_j'(y) for every pair and keeps the solutions
/// lying on the depth-`attractor_depth` cover of K (negative: cells below 1e-6).
inline IFSBranchData branch_structure(const IFSSystem& g, int attractor_depth = -1) {
  IFSBranchData out;
  out.attractor_depth = attractor_depth < 0 ? g.cover_depth() : attractor_depth;
  const int n = g.degree();
  std::vector<PlanePoint> ys;
  std::vector<std::pair<int, int>> pairs;
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k) {
      const auto& a = g.map(j);
      const auto& b = g.map(k);
      // (A_j - A_k) y = b_k - b_j
      const double m00 = a.linear[0][0] - b.linear[0][0], m01 = a.linear[0][1] - b.linear[0][1];
      const double m10 = a.linear[1][0] - b.linear[1][0], m11 = a.linear[1][1] - b.linear[1][1];
      const PlanePoint rhs = b.offset - a.offset;
      const double scale = std::max({std::abs(a.linear[0][0]), std::abs(a.linear[1][1]), std::abs(b.linear[0][0]),
                                     std::abs(b.linear[1][1]), 1e-300});
      std::optional<PlanePoint> y;
      bool degenerate = false;
      if (g.dim() == 1) {
        if (std::abs(m00) > 1e-14 * scale) y = PlanePoint{rhs.x / m00, 0.0};
        else degenerate = std::abs(rhs.x) <= kCollisionTol;
      } else {
        const double d = m00 * m11 - m01 * m10;
        if (std::abs(d) > 1e-14 * scale * scale) {
          y = PlanePoint{(m11 * rhs.x - m01 * rhs.y) / d, (-m10 * rhs.x + m00 * rhs.y) / d};
        } else {
          // rank <= 1: consistent iff rhs lies in the column space
          const double cross0 = m00 * rhs.y - m10 * rhs.x, cross1 = m01 * rhs.y - m11 * rhs.x;
          const bool zero_matrix = std::max({std::abs(m00), std::abs(m01), std::abs(m10), std::abs(m11)}) <= 1e-14 * scale;
          degenerate = zero_matrix ? norm(rhs) <= kCollisionTol
                                   : std::max(std::abs(cross0), std::abs(cross1)) <= kCollisionTol * scale;
        }
      }
      if (!y) {
        out.singular_pairs.push_back({j, k, degenerate});
        continue;
      }
      if (!g.in_cover(*y, out.attractor_depth)) continue;
      ys.push_back(*y);
      pairs.push_back({j, k});
    }

  std::vector<std::size_t> reps;
  const auto ids = greedy_cluster_ids(std::span<const PlanePoint>(ys), kCollisionTol, &reps);
  out.branch_values.resize(reps.size());
  for (std::size_t c = 0; c < reps.size(); ++c) out.branch_values[c].y = ys[reps[c]];
  for (std::size_t i = 0; i < ys.size(); ++i) out.branch_values[ids[i]].pairs.push_back(pairs[i]);

  std::vector<PlanePoint> bs;
  for (const auto& v : out.branch_values)
    for (const auto& [j, k] : v.pairs) bs.push_back(g.map(j)(v.y));
  out.branch_points = detail::distinct(bs);
  std::sort(out.branch_points.begin(), out.branch_points.end(), [](const PlanePoint& a, const PlanePoint& b) {
    return std::pair(a.x, a.y) < std::pair(b.x, b.y);
  });
  return out;
}

// Transfer operators.

/// a~(y) = sum over the set gamma(y) of a.
template <class F>
double tilde_ifs(const IFSSystem& g, F&& f, const PlanePoint& y) {
  return tilde(g, std::forward<F>(f), y);
}

inline PlaneMeasure apply_F_beta_ifs(const IFSSystem& g, const PlaneMeasure& mu, double beta,
                                     std::size_t atom_budget = default_atom_budget()) {
  return apply_F_beta(g, mu, beta, atom_budget);
}

// Hutchinson measure.

enum class HutchinsonMode { Deterministic, ChaosGame };

inline constexpr std::string_view to_string(HutchinsonMode m) {
  return m == HutchinsonMode::Deterministic ? "deterministic" : "chaos-game";
}

struct HutchinsonOptions {
  HutchinsonMode mode = HutchinsonMode::Deterministic;
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 1;
  std::size_t burn_in = 100;
  /// Start point; the fixed point of gamma_1 when absent.
  std::optional<PlanePoint> x0;
  std::size_t atom_budget = default_atom_budget();
  /// Deterministic mode: merge on a coarser grid instead of failing when the budget is hit.
  bool prune = true;
};

struct HutchinsonApprox {
  PlaneMeasure measure;
  HutchinsonMode mode = HutchinsonMode::Deterministic;
  int iterations = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  PlanePoint x0;
  /// Coarsest merge radius used by budget pruning (0 when none was needed).
  double pruned_radius = 0.0;
};

/// (G-bar*)^n delta_{x0} with G-bar(a) = (1/N) sum a o gamma_i, or the
/// empirical measure of a chaos-game orbit.
inline HutchinsonApprox hutchinson(const IFSSystem& g, int n, const HutchinsonOptions& opt = {}) {
  if (n < 0) throw Error(ErrorKind::InvalidArgument, "n must be nonnegative");
  HutchinsonApprox out;
  out.mode = opt.mode;
  out.iterations = n;
  out.x0 = opt.x0.value_or(fixed_point(g.map(0), g.dim()));
  const double inv_n = 1.0 / static_cast<double>(g.degree());

  if (opt.mode == HutchinsonMode::ChaosGame) {
    if (opt.samples < 1) throw Error(ErrorKind::InvalidArgument, "chaos game needs at least one sample");
    out.samples = opt.samples;
    out.seed = opt.seed;
    std::mt19937_64 rng(opt.seed);
    const auto pick = [&] { return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(g.degree())); };
    PlanePoint x = out.x0;
    for (std::size_t i = 0; i < opt.burn_in; ++i) x = g.map(pick())(x);
    std::vector<PlanePoint> pts;
    pts.reserve(opt.samples);
    for (std::size_t i = 0; i < opt.samples; ++i) {
      x = g.map(pick())(x);
      pts.push_back(x);
    }
    std::vector<double> w(pts.size(), 1.0 / static_cast<double>(opt.samples));
    out.measure = PlaneMeasure(std::move(pts), std::move(w), kCollisionTol);
    return out;
  }

  std::vector<PlanePoint> pts{out.x0};
  std::vector<double> w{1.0};
  double tol = kCollisionTol;
  for (int step = 0; step < n; ++step) {
    std::vector<PlanePoint> np;
    std::vector<double> nw;
    np.reserve(pts.size() * g.maps().size());
    nw.reserve(pts.size() * g.maps().size());
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (const auto& m : g.maps()) {
        np.push_back(m(pts[i]));
        nw.push_back(w[i] * inv_n);
      }
    merge_weighted(np, nw, tol, MergeRepresentative::WeightedMean);
    while (np.size() > opt.atom_budget) {
      if (!opt.prune) throw Error(ErrorKind::AtomBudgetExceeded, "Hutchinson approximant exceeds the atom budget");
      tol *= 2.0;
      out.pruned_radius = tol;
      merge_weighted(np, nw, tol, MergeRepresentative::WeightedMean);
    }
    pts = std::move(np);
    w = std::move(nw);
  }
  out.measure = PlaneMeasure(std::move(pts), std::move(w), kCollisionTol);
  return out;
}

// KMS measures.

namespace detail {
inline PlanePoint snap_to_ifs_branch_point(const IFSBranchData& b, const PlanePoint& p, double tol = 1e-6) {
  for (const auto& q : b.branch_points)
    if (distance(p, q) <= tol) return q;
  throw Error(ErrorKind::NotABranchPoint, "(" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                              ") is not a branch point of the system");
}
}  // namespace detail

inline double ifs_tail_bound(int n, double beta, int depth) {
  const double r = static_cast<double>(n) * std::exp(-beta);
  return std::pow(r, depth + 1) / (1.0 - r);
}

/// mu_{beta,b} = (1 - N e^{-beta}) sum_k e^{-k beta} sum_{|w| = k} delta_{gamma_w(b)},
/// truncated after `depth` levels.  A negative depth picks the smallest one
/// with tail bound <= 1e-6 that fits the atom budget.
inline KMSMeasure<PlanePoint> kms_measure_ifs(const IFSSystem& g, const IFSBranchData& bd, const PlanePoint& b_in,
                                              double beta, int depth,
                                              std::size_t atom_budget = default_atom_budget()) {
  const int n = g.degree();
  const double log_n = std::log(static_cast<double>(n));
  if (!(beta > log_n + kCriticalTolerance))
    throw Error(ErrorKind::OutOfRegime, "finite-type states need beta > log N = " + std::to_string(log_n));
  const PlanePoint b = detail::snap_to_ifs_branch_point(bd, b_in);

  KMSMeasure<PlanePoint> k;
  k.anchor = b;
  k.beta = beta;
  k.kind = StateKind::FiniteType;
  k.normalization = 1.0 - static_cast<double>(n) * std::exp(-beta);
  if (depth < 0) {
    depth = 0;
    double level = 1.0, total = 1.0;
    while (ifs_tail_bound(n, beta, depth) > 1e-6) {
      level *= n;
      if (total + level > static_cast<double>(atom_budget)) {
        k.warnings.push_back("atom budget caps the depth at " + std::to_string(depth) +
                             "; tail bound " + std::to_string(ifs_tail_bound(n, beta, depth)));
        break;
      }
      total += level;
      ++depth;
    }
  }
  if (beta - log_n < 0.05)
    k.warnings.push_back("beta is within 0.05 of log N; tail bound " + std::to_string(ifs_tail_bound(n, beta, depth)));

  std::vector<PlanePoint> pts;
  std::vector<double> w;
  PlaneMeasure level = PlaneMeasure::dirac(b);
  double factor = 1.0;
  for (int d = 0; d <= depth; ++d) {
    if (d > 0) {
      level = pullback(g, level, PullbackWeighting::Index, 1.0, atom_budget);
      factor *= std::exp(-beta);
    }
    for (const auto& a : level.atoms()) {
      pts.push_back(a.point);
      w.push_back(k.normalization * factor * a.weight);
    }
    if (pts.size() > atom_budget)
      throw Error(ErrorKind::AtomBudgetExceeded, "KMS measure needs more than " + std::to_string(atom_budget) + " atoms");
  }
  k.measure = PlaneMeasure(std::move(pts), std::move(w), kCollisionTol, MergeRepresentative::First);
  k.truncation_depth = depth;
  k.tail_bound = ifs_tail_bound(n, beta, depth);
  return k;
}

inline KMSMeasure<PlanePoint> kms_measure_ifs(const IFSSystem& g, const PlanePoint& b, double beta, int depth,
                                              std::size_t atom_budget = default_atom_budget()) {
  return kms_measure_ifs(g, branch_structure(g), b, beta, depth, atom_budget);
}

inline TestFunctionLibrary plane_library(const IFSSystem& g, int degree = 4) {
  return TestFunctionLibrary::plane(g.bounding_box(), g.dim(), degree);
}

inline TraceCheck check_K1_ifs(const IFSSystem& g, const IFSBranchData& bd, const PlaneMeasure& mu, double beta,
                               const TestFunctionLibrary& lib, double rho = 1e-3) {
  return check_K1(g, bd.branch_points, mu, beta, lib, rho);
}

inline TraceCheck check_K2_ifs(const IFSSystem& g, const PlaneMeasure& mu, double beta,
                               const TestFunctionLibrary& lib) {
  return check_K2(g, mu, beta, lib);
}

// The orbit hypothesis.

enum class CertificateStatus { Certified, InconclusiveAtDepth };

inline constexpr std::string_view to_string(CertificateStatus s) {
  return s == CertificateStatus::Certified ? "certified" : "inconclusive";
}

struct OrbitCertificate {
  PlanePoint y;  // branch value
  CertificateStatus status = CertificateStatus::InconclusiveAtDepth;
  std::optional<PlanePoint> witness;  // x in O(y) with O(x) disjoint from C
  int witness_level = -1;
};

struct OrbitConditionReport {
  std::vector<OrbitCertificate> certificates;
  bool all_certified() const {
    return std::all_of(certificates.begin(), certificates.end(),
                       [](const auto& c) { return c.status == CertificateStatus::Certified; });
  }
};

namespace detail {

/// Points p of K with gamma_w(p) in `targets` for some word w, if that set
/// closes up within `depth` rounds.
inline std::optional<std::vector<PlanePoint>> backward_closure(const IFSSystem& g, const std::vector<PlanePoint>& targets,
                                                               int depth, int cover_depth) {
  std::vector<PlanePoint> all = targets;
  std::vector<PlanePoint> frontier = targets;
  for (int round = 0; round < depth && !frontier.empty(); ++round) {
    std::vector<PlanePoint> next;
    for (const auto& p : frontier)
      for (const auto& m : g.maps()) {
        const PlanePoint q = m.inverse(p, g.dim());
        if (!g.in_cover(q, cover_depth)) continue;
        if (distance_to_set(q, all) <= kCollisionTol) continue;
        all.push_back(q);
        next.push_back(q);
      }
    frontier = std::move(next);
    if (all.size() > 20000) return std::nullopt;
  }
  if (!frontier.empty()) return std::nullopt;
  return all;
}

}  // namespace detail

/// For each y in C(gamma) searches O(y) breadth-first for x with O(x)
/// disjoint from C(gamma).  gamma_w(x) lands in C exactly when x lies in the
/// backward closure P of C inside K, so x is a witness iff x is not in P.
/// When P does not close up within 4 * depth rounds the result is inconclusive.
inline OrbitConditionReport orbit_condition(const IFSSystem& g, const IFSBranchData& bd, int depth) {
  OrbitConditionReport rep;
  const auto c = bd.values();
  if (c.empty()) return rep;
  const auto closure = detail::backward_closure(g, c, std::max(depth, 1) * 4, bd.attractor_depth);

  for (const auto& y : c) {
    OrbitCertificate cert;
    cert.y = y;
    std::vector<PlanePoint> level{y};
    for (int lv = 0; lv <= depth && cert.status != CertificateStatus::Certified; ++lv) {
      for (const auto& x : level) {
        const bool ok = closure && detail::distance_to_set(x, *closure) > kCollisionTol;
        if (ok) {
          cert.status = CertificateStatus::Certified;
          cert.witness = x;
          cert.witness_level = lv;
          break;
        }
      }
      std::vector<PlanePoint> next;
      for (const auto& x : level)
        for (const auto& m : g.maps()) next.push_back(m(x));
      level = detail::distinct(next);
      if (level.size() > 4096) level.resize(4096);
    }
    rep.certificates.push_back(cert);
  }
  return rep;
}

inline OrbitConditionReport orbit_condition(const IFSSystem& g, int depth) {
  return orbit_condition(g, branch_structure(g), depth);
}

/// No states below log N, the Hutchinson state at log N, one finite-type
/// state per branch point above.  An uncertified orbit hypothesis is
/// reported as a warning.
inline PhaseReport<PlanePoint> classify_ifs(const IFSSystem& g, const IFSBranchData& bd, double beta,
                                            bool critical = false, int orbit_depth = 10) {
  if (!(beta >= 0.0) && !critical) throw Error(ErrorKind::InvalidArgument, "beta must be nonnegative");
  PhaseReport<PlanePoint> rep;
  rep.regime = regime_of(beta, g.degree(), critical);
  rep.beta = rep.regime == Regime::Critical ? std::log(static_cast<double>(g.degree())) : beta;
  if (!orbit_condition(g, bd, orbit_depth).all_certified())
    rep.warnings.push_back("HypothesisUncertified: orbit condition not certified at depth " +
                           std::to_string(orbit_depth));
  for (const auto& s : bd.singular_pairs)
    if (s.degenerate)
      rep.warnings.push_back("maps " + std::to_string(s.j) + " and " + std::to_string(s.k) +
                             " agree on a line; the branch set is not finite");
  if (rep.regime == Regime::Critical) {
    rep.states.push_back({StateKind::InfiniteType, {}});
    ++rep.infinite_count;
  } else if (rep.regime == Regime::Supercritical) {
    for (const auto& b : bd.branch_points) {
      rep.states.push_back({StateKind::FiniteType, {b}});
      ++rep.finite_count;
    }
  }
  return rep;
}

inline PhaseReport<PlanePoint> classify_ifs(const IFSSystem& g, double beta, bool critical = false,
                                            int orbit_depth = 10) {
  return classify_ifs(g, branch_structure(g), beta, critical, orbit_depth);
}

}  // namespace kmsdyn
