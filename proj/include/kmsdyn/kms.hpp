#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kmsdyn/measure.hpp"
#include "kmsdyn/ratmap.hpp"

namespace kmsdyn {

enum class StateKind { FiniteType, InfiniteType };

inline constexpr std::string_view to_string(StateKind k) {
  return k == StateKind::FiniteType ? "finite" : "infinite";
}

template <class Point>
struct KMSMeasure {
  AtomicMeasure<Point> measure;
  Point anchor;
  double beta = 0.0;
  StateKind kind = StateKind::FiniteType;
  /// Prefactor m in m * sum_k e^{-k beta} F^k(delta_w).
  double normalization = 1.0;
  int truncation_depth = 0;
  /// Bound on the mass missing from `measure` (and on |total_mass - 1|).
  double tail_bound = 0.0;
  bool closed_form = false;
  std::vector<std::string> warnings;
};

/// |beta - log N| below this counts as critical.
inline constexpr double kCriticalTolerance = 1e-12;

struct KMSOptions {
  /// Raise the depth so that tail_bound <= 1e-6 when beta > log N + 0.05.
  bool auto_depth = false;
  std::size_t atom_budget = default_atom_budget();
  double tol = kDefaultPointTol;
};

namespace detail {

/// Closed form on a cycle x_0 = w, x_1, ..., x_{p-1} inside E_R, where
/// x_{j+1} is the unique preimage of x_j: weight m e^{-j beta}/(1 - e^{-p beta})
/// with m = 1 - e^{-beta}.  At beta = 0 the limit is uniform on the cycle.
inline KMSMeasure<SpherePoint> exceptional_kms(const RationalMap& r, const SpherePoint& w, double beta, double tol) {
  std::vector<SpherePoint> cycle{w};
  const auto back = preimages(r, w, tol);
  if (back.size() == 1 && chordal_distance(back[0].point, w) > 1e-6) cycle.push_back(back[0].point);

  KMSMeasure<SpherePoint> k;
  k.anchor = w;
  k.beta = beta;
  k.closed_form = true;
  const double q = std::exp(-beta);
  k.normalization = -std::expm1(-beta);
  std::vector<double> wt;
  if (cycle.size() == 1) {
    wt = {1.0};
  } else if (beta == 0.0) {
    wt = {0.5, 0.5};
  } else {
    wt = {1.0 / (1.0 + q), q / (1.0 + q)};
  }
  std::vector<Atom<SpherePoint>> atoms;
  for (std::size_t j = 0; j < cycle.size(); ++j) atoms.push_back({cycle[j], wt[j]});
  k.measure = SphereMeasure::from_atoms(std::move(atoms));
  return k;
}

inline SpherePoint snap_to_branch_point(const BranchData& b, const SpherePoint& w) {
  for (const auto& bp : b.branch_points)
    if (chordal_distance(bp.point, w) <= 1e-6) return bp.point;
  throw Error(ErrorKind::NotABranchPoint, "anchor is not a branch point of the map");
}

}  // namespace detail

/// mu_{beta,w} = m sum_k e^{-k beta} sum_{z in R^{-k}(w)} delta_z, truncated
/// after `depth` levels.  For w in E_R the series is summed in closed form.
///
/// The normalization m is that of the full series: the level masses c_k
/// (backward path counts) are computed through the truncation depth and the
/// remaining levels are continued geometrically, c_{k+1} = N c_k, which is
/// exact once the backward orbit stops meeting the critical values.
inline KMSMeasure<SpherePoint> kms_measure(const RationalMap& r, const SpherePoint& w_in, double beta, int depth,
                                           const KMSOptions& opt = {}) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::InvalidArgument, "beta must be nonnegative");
  if (depth < 0) throw Error(ErrorKind::InvalidArgument, "depth must be nonnegative");
  const BranchData b = branch_data(r, opt.tol);
  const SpherePoint w = detail::snap_to_branch_point(b, w_in);
  const int n = r.degree();
  const double log_n = std::log(static_cast<double>(n));

  const auto exc = exceptional_points(r, b, opt.tol);
  if (exc.contains(w, 1e-6)) return detail::exceptional_kms(r, w, beta, opt.tol);
  if (beta <= log_n + kCriticalTolerance)
    throw Error(ErrorKind::OutOfRegime, "no finite-type state at a non-exceptional point for beta <= log N = " +
                                            std::to_string(log_n));

  const double ratio = n * std::exp(-beta);
  KMSMeasure<SpherePoint> k;
  k.anchor = w;
  k.beta = beta;
  if (beta <= log_n + 0.05)
    k.warnings.push_back("near-critical beta: the series converges like (N e^-beta)^k with ratio " +
                         std::to_string(ratio));
  if (opt.auto_depth && beta > log_n + 0.05) {
    const int need = static_cast<int>(std::ceil(std::log(1e-6 * (1.0 - ratio)) / std::log(ratio))) - 1;
    depth = std::max(depth, need);
  }

  const auto tree = backward_orbit(r, w, depth, OrbitWeighting::SetCount, opt.atom_budget, opt.tol);
  const int reached = static_cast<int>(tree.levels.size()) - 1;
  if (tree.truncated)
    k.warnings.push_back("atom budget reached; truncated at depth " + std::to_string(reached) + " instead of " +
                         std::to_string(depth));

  std::vector<SpherePoint> pts;
  std::vector<double> wt;
  double partial = 0.0, c_last = 0.0;
  for (int lvl = 0; lvl <= reached; ++lvl) {
    const double damp = std::exp(-beta * lvl);
    double c = 0.0;
    for (const auto& a : tree.levels[static_cast<std::size_t>(lvl)]) {
      pts.push_back(a.point);
      wt.push_back(damp * a.weight);
      c += a.weight;
    }
    partial += damp * c;
    c_last = c;
  }
  const double tail_unnormalized = c_last * std::exp(-beta * reached) * ratio / (1.0 - ratio);
  const double m = 1.0 / (partial + tail_unnormalized);
  for (auto& x : wt) x *= m;

  k.measure = SphereMeasure(std::move(pts), std::move(wt), opt.tol, MergeRepresentative::First);
  k.normalization = m;
  k.truncation_depth = reached;
  k.tail_bound = m * tail_unnormalized;
  return k;
}

// K1 / K2 ---------------------------------------------------------------

/// 0 on [0, 1], 1 on [2, inf), quintic smooth step in between.
inline double smooth_cutoff(double t) {
  if (t <= 1.0) return 0.0;
  if (t >= 2.0) return 1.0;
  const double s = t - 1.0;
  return s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

struct TraceCheck {
  /// max over library functions (after cutoff for K1).
  double max_residual = 0.0;
  std::size_t worst_function = 0;
  /// Atomwise check: (K1)' residual for K1, (K2)' violation for K2.
  double atom_residual = 0.0;
  /// K1 only: mass of mu and F_beta(mu) where the cutoff is strictly between 0 and 1.
  double cutoff_mass = 0.0;
  double cutoff_radius = 0.0;
};

namespace detail {

/// Pairs up the atoms of mu and nu (merged at tol) and returns, per point,
/// (point, mu{x}, nu{x}).
template <class Point>
struct AtomPair {
  Point point;
  double mu = 0.0;
  double nu = 0.0;
};

template <class Point>
std::vector<AtomPair<Point>> pair_atoms(const AtomicMeasure<Point>& mu, const AtomicMeasure<Point>& nu, double tol) {
  std::vector<Point> pts;
  for (const auto& a : mu.atoms()) pts.push_back(a.point);
  for (const auto& a : nu.atoms()) pts.push_back(a.point);
  std::vector<std::size_t> reps;
  const auto ids = greedy_cluster_ids(std::span<const Point>(pts), tol, &reps);
  std::vector<AtomPair<Point>> out(reps.size());
  for (std::size_t c = 0; c < reps.size(); ++c) out[c].point = pts[reps[c]];
  const std::size_t nm = mu.size();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i < nm) out[ids[i]].mu += mu.atoms()[i].weight;
    else out[ids[i]].nu += nu.atoms()[i - nm].weight;
  }
  return out;
}

template <class Point>
double distance_to_set(const Point& x, const std::vector<Point>& set) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& s : set) d = std::min(d, distance(x, s));
  return d;
}

}  // namespace detail

/// (K1): e^{-beta} int a~ dmu = int a dmu for a vanishing near the branch
/// points.  Each library function is multiplied by a cutoff that vanishes on
/// the rho-neighbourhood of `branch` and equals 1 outside 2 rho.
template <TransferSystem Sys>
TraceCheck check_K1(const Sys& sys, const std::vector<typename Sys::point_type>& branch,
                    const AtomicMeasure<typename Sys::point_type>& mu, double beta, const TestFunctionLibrary& lib,
                    double rho = 1e-3, std::size_t atom_budget = default_atom_budget()) {
  using Point = typename Sys::point_type;
  const auto fmu = apply_F_beta(sys, mu, beta, atom_budget);
  auto chi = [&](const Point& x) { return smooth_cutoff(detail::distance_to_set(x, branch) / rho); };
  const auto a = integrate_library(mu, lib, chi);
  const auto fa = integrate_library(fmu, lib, chi);

  TraceCheck out;
  out.cutoff_radius = rho;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double res = std::abs(fa[i] - a[i]);
    if (res > out.max_residual) {
      out.max_residual = res;
      out.worst_function = i;
    }
  }
  auto partial = [&](const AtomicMeasure<Point>& m) {
    double t = 0.0;
    for (const auto& x : m.atoms()) {
      const double c = chi(x.point);
      if (c > 0.0 && c < 1.0) t += std::abs(x.weight);
    }
    return t;
  };
  out.cutoff_mass = partial(mu) + partial(fmu);
  for (const auto& p : detail::pair_atoms(mu, fmu, sys.tolerance())) {
    if (p.mu == 0.0) continue;  // support of mu only
    if (detail::distance_to_set(p.point, branch) <= 1e-6) continue;
    out.atom_residual = std::max(out.atom_residual, std::abs(p.nu - p.mu));
  }
  return out;
}

/// (K2): e^{-beta} int a~ dmu <= int a dmu for nonnegative a; checked on 1
/// and on |f|_sup +- f for each library function f, and atom by atom.
template <TransferSystem Sys>
TraceCheck check_K2(const Sys& sys, const AtomicMeasure<typename Sys::point_type>& mu, double beta,
                    const TestFunctionLibrary& lib, std::size_t atom_budget = default_atom_budget()) {
  const auto fmu = apply_F_beta(sys, mu, beta, atom_budget);
  const auto a = integrate_library(mu, lib);
  const auto fa = integrate_library(fmu, lib);
  const double m0 = mu.total_mass(), m1 = fmu.total_mass();

  TraceCheck out;
  auto consider = [&](double v, std::size_t i) {
    if (v > out.max_residual) {
      out.max_residual = v;
      out.worst_function = i;
    }
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double s = lib.sup_norm(i);
    consider((s * m1 + fa[i]) - (s * m0 + a[i]), i);
    consider((s * m1 - fa[i]) - (s * m0 - a[i]), i);
  }
  consider(m1 - m0, 0);
  for (const auto& p : detail::pair_atoms(mu, fmu, sys.tolerance()))
    out.atom_residual = std::max(out.atom_residual, p.nu - p.mu);
  return out;
}

inline std::vector<SpherePoint> branch_point_list(const BranchData& b) {
  std::vector<SpherePoint> v;
  for (const auto& bp : b.branch_points) v.push_back(bp.point);
  return v;
}

inline TraceCheck check_K1(const RationalMap& r, const SphereMeasure& mu, double beta,
                           const TestFunctionLibrary& lib = TestFunctionLibrary::sphere(), double rho = 1e-3) {
  return check_K1(RationalSystem(r), branch_point_list(branch_data(r)), mu, beta, lib, rho);
}

inline TraceCheck check_K2(const RationalMap& r, const SphereMeasure& mu, double beta,
                           const TestFunctionLibrary& lib = TestFunctionLibrary::sphere()) {
  return check_K2(RationalSystem(r), mu, beta, lib);
}

// Lyubich -----------------------------------------------------------------

/// mu_n^y = N^{-n} (G*)^n delta_y; total mass 1.
inline SphereMeasure lyubich(const RationalMap& r, const SpherePoint& y, int n,
                             std::size_t atom_budget = default_atom_budget(), double tol = kDefaultPointTol) {
  if (n < 0) throw Error(ErrorKind::InvalidArgument, "n must be nonnegative");
  if (exceptional_points(r, tol).contains(y, 1e-6))
    throw Error(ErrorKind::ExceptionalSeed, "the Lyubich approximation needs a non-exceptional seed");
  const RationalSystem sys(r, tol);
  const double inv_n = 1.0 / r.degree();
  auto mu = SphereMeasure::dirac(y);
  for (int k = 0; k < n; ++k) mu = pullback(sys, mu, PullbackWeighting::Index, inv_n, atom_budget);
  return mu;
}

/// max over the library of |int f o R dmu - int f dmu|.
inline double lyubich_invariance_residual(const RationalMap& r, const SphereMeasure& mu,
                                          const TestFunctionLibrary& lib = TestFunctionLibrary::sphere()) {
  std::vector<double> a(lib.size(), 0.0), b(lib.size(), 0.0), v(lib.size());
  for (const auto& at : mu.atoms()) {
    lib.eval(at.point, v);
    for (std::size_t i = 0; i < v.size(); ++i) a[i] += at.weight * v[i];
    lib.eval(r(at.point), v);
    for (std::size_t i = 0; i < v.size(); ++i) b[i] += at.weight * v[i];
  }
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Divergence below log N ---------------------------------------------------

struct DivergenceWitness {
  SpherePoint z;
  SpherePoint witness;
  /// w lies in R^{-level}(z).
  int level = 0;
  double beta = 0.0;
  int depth = 0;
  /// Number of points of R^{-n}(w), n = 0..depth.
  std::vector<std::size_t> level_sizes;
  /// sum_{k <= n} e^{-k beta} |R^{-k}(w)|, n = 0..depth.
  std::vector<double> partial_sums;
  /// Any (K2) measure charging z has total mass >= this times mu{w}.
  double certified_mass_ratio = 0.0;
};

/// Searches O^-(z) breadth first for w whose backward orbit through `depth`
/// levels avoids the critical values and has pairwise disjoint levels.  Then
/// (K2)' forces mu(R^{-n}(w)) >= (N e^{-beta})^n mu{w} on each level, and
/// the level masses add up.
inline DivergenceWitness divergence_witness(const RationalMap& r, const SpherePoint& z, double beta, int depth,
                                            int search_levels = 3, std::size_t atom_budget = default_atom_budget(),
                                            double tol = kDefaultPointTol) {
  const BranchData b = branch_data(r, tol);
  if (exceptional_points(r, b, tol).contains(z, 1e-6))
    throw Error(ErrorKind::ExceptionalSeed, "z is exceptional; its backward orbit is finite");
  const double log_n = std::log(static_cast<double>(r.degree()));
  if (!(beta > 0.0) || beta >= log_n)
    throw Error(ErrorKind::OutOfRegime, "divergence witness needs 0 < beta < log N = " + std::to_string(log_n));
  if (depth < 0) throw Error(ErrorKind::InvalidArgument, "depth must be nonnegative");

  auto avoids_critical = [&](const SpherePoint& p) {
    for (const auto& c : b.branch_values)
      if (chordal_distance(p, c) <= 1e-6) return false;
    return true;
  };

  const auto candidates = backward_orbit(r, z, search_levels, OrbitWeighting::SetCount, atom_budget, tol);
  for (std::size_t lvl = 0; lvl < candidates.levels.size(); ++lvl) {
    for (const auto& cand : candidates.levels[lvl]) {
      const auto tree = backward_orbit(r, cand.point, depth, OrbitWeighting::SetCount, atom_budget, tol);
      if (tree.truncated) continue;
      bool ok = true;
      std::vector<SpherePoint> all;
      for (const auto& level : tree.levels)
        for (const auto& a : level) {
          ok = ok && avoids_critical(a.point);
          all.push_back(a.point);
        }
      if (!ok) continue;
      if (cluster(all, 1e-7).size() != all.size()) continue;  // levels meet

      DivergenceWitness out;
      out.z = z;
      out.witness = cand.point;
      out.level = static_cast<int>(lvl);
      out.beta = beta;
      out.depth = depth;
      double s = 0.0;
      for (std::size_t k = 0; k < tree.levels.size(); ++k) {
        out.level_sizes.push_back(tree.levels[k].size());
        s += std::exp(-beta * static_cast<double>(k)) * static_cast<double>(tree.levels[k].size());
        out.partial_sums.push_back(s);
      }
      out.certified_mass_ratio = s;
      return out;
    }
  }
  throw Error(ErrorKind::WitnessNotFoundAtDepth,
              "no witness among " + std::to_string(search_levels) + " backward levels at depth " +
                  std::to_string(depth) + "; inconclusive");
}

// Phase portrait -----------------------------------------------------------

enum class Regime { Zero, Subcritical, Critical, Supercritical };

inline constexpr std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Zero: return "zero";
    case Regime::Subcritical: return "subcritical";
    case Regime::Critical: return "critical";
    case Regime::Supercritical: return "supercritical";
  }
  return "?";
}

template <class Point>
struct ExtremeState {
  StateKind kind = StateKind::FiniteType;
  /// Empty for the Lyubich (or Hutchinson) state; two points for the
  /// beta = 0 trace supported on a 2-cycle.
  std::vector<Point> anchors;
};

template <class Point>
struct PhaseReport {
  double beta = 0.0;
  Regime regime = Regime::Zero;
  std::vector<ExtremeState<Point>> states;
  int finite_count = 0;
  int infinite_count = 0;
  std::vector<std::string> warnings;
};

inline Regime regime_of(double beta, int n, bool critical) {
  const double log_n = std::log(static_cast<double>(n));
  if (critical || std::abs(beta - log_n) < kCriticalTolerance) return Regime::Critical;
  if (beta == 0.0) return Regime::Zero;
  return beta < log_n ? Regime::Subcritical : Regime::Supercritical;
}

/// Extreme beta-KMS states of O_R(C^): one finite-type state per branch
/// point above log N, per exceptional point in (0, log N], plus the Lyubich
/// state at log N; at beta = 0 the invariant traces of the exceptional set.
inline PhaseReport<SpherePoint> classify(const RationalMap& r, double beta, bool critical = false,
                                         double tol = kDefaultPointTol) {
  if (!(beta >= 0.0) && !critical) throw Error(ErrorKind::InvalidArgument, "beta must be nonnegative");
  const BranchData b = branch_data(r, tol);
  const auto exc = exceptional_points(r, b, tol);
  PhaseReport<SpherePoint> rep;
  rep.regime = regime_of(beta, r.degree(), critical);
  rep.beta = rep.regime == Regime::Critical ? std::log(static_cast<double>(r.degree())) : beta;

  auto finite = [&](std::vector<SpherePoint> anchors) {
    rep.states.push_back({StateKind::FiniteType, std::move(anchors)});
    ++rep.finite_count;
  };
  switch (rep.regime) {
    case Regime::Zero:
      if (exc.case_tag == ExceptionalCase::TwoSwapped) finite(exc.points);
      else
        for (const auto& p : exc.points) finite({p});
      break;
    case Regime::Subcritical:
      for (const auto& p : exc.points) finite({p});
      break;
    case Regime::Critical:
      rep.states.push_back({StateKind::InfiniteType, {}});
      ++rep.infinite_count;
      for (const auto& p : exc.points) finite({p});
      break;
    case Regime::Supercritical:
      for (const auto& bp : b.branch_points) finite({bp.point});
      break;
  }
  return rep;
}

/// The same classification for O_R(J_R), which has no exceptional points;
/// `julia_branch_points` are the branch points asserted to lie in J_R.
inline PhaseReport<SpherePoint> classify_julia(const RationalMap& r, double beta,
                                               const std::vector<SpherePoint>& julia_branch_points,
                                               bool critical = false, double tol = kDefaultPointTol) {
  const BranchData b = branch_data(r, tol);
  PhaseReport<SpherePoint> rep;
  rep.regime = regime_of(beta, r.degree(), critical);
  rep.beta = rep.regime == Regime::Critical ? std::log(static_cast<double>(r.degree())) : beta;
  if (rep.regime == Regime::Critical) {
    rep.states.push_back({StateKind::InfiniteType, {}});
    ++rep.infinite_count;
  } else if (rep.regime == Regime::Supercritical) {
    for (const auto& p : julia_branch_points) {
      rep.states.push_back({StateKind::FiniteType, {detail::snap_to_branch_point(b, p)}});
      ++rep.finite_count;
    }
  } else if (rep.regime == Regime::Zero) {
    rep.warnings.push_back("beta = 0 is not covered for the Julia-set algebra");
  }
  return rep;
}

/// The measure of an extreme state: kms_measure for finite type, the
/// Lyubich approximant for infinite type, the averaged 2-cycle at beta = 0.
inline KMSMeasure<SpherePoint> state_measure(const RationalMap& r, const ExtremeState<SpherePoint>& s, double beta,
                                             int depth, const KMSOptions& opt = {},
                                             const SpherePoint& lyubich_seed = from_affine(complex(0.5, 0.25))) {
  if (s.kind == StateKind::InfiniteType) {
    KMSMeasure<SpherePoint> k;
    k.measure = lyubich(r, lyubich_seed, depth, opt.atom_budget, opt.tol);
    k.anchor = lyubich_seed;
    k.beta = beta;
    k.kind = StateKind::InfiniteType;
    k.truncation_depth = depth;
    return k;
  }
  if (s.anchors.size() == 2 && beta == 0.0) {
    KMSMeasure<SpherePoint> k;
    k.measure = SphereMeasure::from_atoms({{s.anchors[0], 0.5}, {s.anchors[1], 0.5}});
    k.anchor = s.anchors[0];
    k.closed_form = true;
    return k;
  }
  return kms_measure(r, s.anchors.at(0), beta, depth, opt);
}

}  // namespace kmsdyn
