// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kmsdyn/ifs.hpp"
#include "kmsdyn/kms.hpp"
#include "kmsdyn/parser.hpp"
#include "kmsdyn/ratmap.hpp"

using namespace kmsdyn;

namespace {

/// Collects failed expectations for one criterion.
struct Checker {
  std::vector<std::string> failures;
  std::ostringstream notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

SpherePoint pt(complex c) { return from_affine(c); }

bool is_dirac_at(const SphereMeasure& mu, const SpherePoint& p) {
  return mu.size() == 1 && mu.atoms()[0].weight == 1.0 && chordal_distance(mu.atoms()[0].point, p) <= 1e-12;
}

void criterion1(Checker& c) {
  const auto r = parse_map("1/z^2");
  const SpherePoint zero = pt(0.0), inf = SpherePoint::infinity();
  for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double eb = std::exp(beta), big = eb / (eb + 1), small = 1 / (eb + 1);
    for (const auto& [w, other] : {std::pair{zero, inf}, std::pair{inf, zero}}) {
      const auto k = kms_measure(r, w, beta, 0);
      const double a = k.measure.mass_at(w), b = k.measure.mass_at(other);
      c.expect(k.measure.size() == 2, "two atoms at beta " + num(beta));
      c.expect(std::abs(a - big) <= 1e-12 && std::abs(b - small) <= 1e-12,
               "weights at beta " + num(beta) + ": " + num(a) + ", " + num(b));
    }
  }
}

void criterion2(Checker& c) {
  for (int n : {2, 3, 4}) {
    const auto r = parse_map("z^" + std::to_string(n));
    const auto e = exceptional_points(r);
    c.expect(e.case_tag == ExceptionalCase::TwoFixed, "z^" + std::to_string(n) + " case tag");
    for (double beta : {0.1, 1.0, 10.0}) {
      const auto k0 = kms_measure(r, pt(0.0), beta, 10);
      const auto ki = kms_measure(r, SpherePoint::infinity(), beta, 10);
      c.expect(is_dirac_at(k0.measure, pt(0.0)), "mu_0 for z^" + std::to_string(n) + " at beta " + num(beta));
      c.expect(is_dirac_at(ki.measure, SpherePoint::infinity()),
               "mu_inf for z^" + std::to_string(n) + " at beta " + num(beta));
    }
  }
}

void criterion3(Checker& c) {
  const auto r = parse_map("z^2+1");
  struct Case {
    double beta;
    bool critical;
    std::size_t states;
    int infinite;
  };
  for (const auto& k : {Case{0.3, false, 1, 0}, Case{0.6, false, 1, 0}, Case{0.0, true, 2, 1}, Case{0.8, false, 2, 0},
                        Case{1.5, false, 2, 0}}) {
    const auto rep = classify(r, k.beta, k.critical);
    const std::string label = k.critical ? "critical" : "beta " + num(k.beta);
    c.expect(rep.states.size() == k.states, label + ": " + std::to_string(rep.states.size()) + " states");
    c.expect(rep.infinite_count == k.infinite, label + ": infinite count");
    c.notes << label << "=" << rep.states.size() << " ";
  }
}

void criterion4(Checker& c) {
  const auto r = parse_map("z^2+1");
  const double beta = 1.0, q = 2.0 / std::numbers::e;
  const auto k = kms_measure(r, pt(0.0), beta, 14);
  const double m = 1.0 - q;
  const double tail = std::pow(q, 15) / (1.0 - q) * m;
  const auto lib = TestFunctionLibrary::sphere();
  const double bound = tail * lib.norm();
  const auto k1 = check_K1(r, k.measure, beta, lib);
  const auto k2 = check_K2(r, k.measure, beta, lib);
  c.expect(std::abs(k.normalization - m) <= 1e-15, "normalization " + num(k.normalization));
  c.expect(std::abs(k.tail_bound - tail) <= 1e-12 * tail, "tail_bound " + num(k.tail_bound) + " vs " + num(tail));
  c.expect(k1.max_residual <= bound, "K1 residual " + num(k1.max_residual) + " > " + num(bound));
  c.expect(k2.max_residual <= bound, "K2 residual " + num(k2.max_residual) + " > " + num(bound));
  c.notes << "bound=" << num(bound) << " K1=" << num(k1.max_residual) << " K2=" << num(k2.max_residual);
}

void criterion5(Checker& c) {
  const auto r = parse_map("z^2");
  const auto mu = lyubich(r, pt(1.0), 16);
  c.expect(mu.size() == 65536, "atom count " + std::to_string(mu.size()));
  const double res = lyubich_invariance_residual(r, mu);
  c.expect(res <= 1e-3, "invariance residual " + num(res));
  std::array<double, 3> moment{};
  for (const auto& a : mu.atoms()) {
    const auto e = embedding(a.point);
    for (int i = 0; i < 3; ++i) moment[static_cast<std::size_t>(i)] += a.weight * e[static_cast<std::size_t>(i)];
  }
  const double norm = std::hypot(moment[0], moment[1], moment[2]);
  c.expect(norm <= 1e-10, "first moment " + num(norm));
  c.notes << "residual=" << num(res) << " moment=" << num(norm);
}

void criterion6(Checker& c) {
  const double beta = 0.5;
  const auto w = divergence_witness(parse_map("z^2"), pt(1.0), beta, 12);
  double geometric = 0.0;
  for (int n = 0; n <= 12; ++n) geometric += std::pow(2.0 * std::exp(-beta), n);
  c.expect(w.certified_mass_ratio >= geometric * (1 - 1e-12),
           "certified " + num(w.certified_mass_ratio) + " < " + num(geometric));
  c.notes << "certified=" << num(w.certified_mass_ratio) << " geometric=" << num(geometric);
}

/// Random exact map with small Gaussian-rational coefficients, coprime and of degree n.
RationalMap random_exact_map(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> coef(-5, 5), dq(0, n);
  for (;;) {
    const int qdeg = dq(rng);
    const int pdeg = qdeg < n || (rng() & 1u) ? n : std::uniform_int_distribution<int>(0, n)(rng);
    std::vector<GaussianRational> p(static_cast<std::size_t>(pdeg) + 1), q(static_cast<std::size_t>(qdeg) + 1);
    for (auto& x : p) x = GaussianRational(rational(coef(rng), 1 + static_cast<int>(rng() % 4)), rational(coef(rng)));
    for (auto& x : q) x = GaussianRational(rational(coef(rng), 1 + static_cast<int>(rng() % 4)), rational(coef(rng)));
    const ExactPoly P(p), Q(q);
    if (P.is_zero() || Q.is_zero() || std::max(P.degree(), Q.degree()) != n) continue;
    if (gcd(P, Q).degree() > 0) continue;
    return RationalMap(P, Q);
  }
}

void criterion7(Checker& c) {
  std::mt19937_64 rng(20261017);
  std::normal_distribution<double> g;
  int failures = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 4;
    const auto r = random_exact_map(rng, n);
    const auto b = branch_data(r);
    int rh = 0;
    for (const auto& bp : b.branch_points) rh += bp.index - 1;
    if (rh != 2 * n - 2) ++failures;
    for (int k = 0; k < 20; ++k) {
      const auto y = pt(complex(g(rng), g(rng)) * std::exp(g(rng)));
      int total = 0;
      for (const auto& x : preimages(r, y)) total += x.multiplicity;
      if (total != n) ++failures;
    }
  }
  c.expect(failures == 0, std::to_string(failures) + " failures");
}

void criterion8(Checker& c) {
  const auto tent = tent_ifs();
  const auto h = hutchinson(tent, 20);
  double m1 = 0.0, m2 = 0.0;
  for (const auto& a : h.measure.atoms()) {
    m1 += a.weight * a.point.x;
    m2 += a.weight * a.point.x * a.point.x;
  }
  c.expect(std::abs(m1 - 0.5) <= 1e-6, "first moment " + num(m1));
  c.expect(std::abs(m2 - 1.0 / 3.0) <= 1e-5, "second moment " + num(m2));

  const double beta = std::log(4.0);
  const auto bd = branch_structure(tent);
  const auto k = kms_measure_ifs(tent, bd, PlanePoint{0.5, 0.0}, beta, 16);
  c.expect(k.normalization == 0.5, "prefactor " + num(k.normalization));
  const auto lib = plane_library(tent);
  const double bound = k.tail_bound * lib.norm();
  const auto k1 = check_K1_ifs(tent, bd, k.measure, beta, lib);
  const auto k2 = check_K2_ifs(tent, k.measure, beta, lib);
  c.expect(k1.max_residual <= bound, "K1 residual " + num(k1.max_residual) + " > " + num(bound));
  c.expect(k2.max_residual <= bound, "K2 residual " + num(k2.max_residual) + " > " + num(bound));
  c.notes << "moments=" << num(m1) << "," << num(m2) << " K1=" << num(k1.max_residual) << " bound=" << num(bound);
}

void criterion9(Checker& c) {
  const auto g = sierpinski_twisted_ifs();
  const auto bd = branch_structure(g);
  const double s3 = std::sqrt(3.0);
  const std::vector<PlanePoint> expected{{0.25, s3 / 4}, {0.75, s3 / 4}, {0.5, 0.0}};
  c.expect(bd.branch_points.size() == 3, std::to_string(bd.branch_points.size()) + " branch points");
  for (const auto& e : expected) {
    bool found = false;
    for (const auto& p : bd.branch_points) found = found || std::hypot(p.x - e.x, p.y - e.y) <= 1e-9;
    c.expect(found, "midpoint (" + num(e.x) + ", " + num(e.y) + ") missing");
  }
  const auto below = classify_ifs(g, bd, 1.0);
  const auto at = classify_ifs(g, bd, std::log(3.0));
  const auto at_flag = classify_ifs(g, bd, 0.0, true);
  const auto above = classify_ifs(g, bd, 1.5);
  c.expect(below.states.empty(), "beta 1.0: " + std::to_string(below.states.size()) + " states");
  c.expect(at.states.size() == 1 && at.infinite_count == 1, "log 3: " + std::to_string(at.states.size()) + " states");
  c.expect(at_flag.states.size() == 1, "critical flag: " + std::to_string(at_flag.states.size()) + " states");
  c.expect(above.states.size() == 3 && above.finite_count == 3,
           "beta 1.5: " + std::to_string(above.states.size()) + " states");
  const auto oc = orbit_condition(g, bd, 10);
  c.expect(oc.all_certified(), "orbit condition not certified at depth 10");
}

void criterion10(Checker& c) {
  const auto states_of = [](const char* src) {
    const auto r = parse_map(src);
    std::vector<SphereMeasure> out;
    for (const auto& s : classify(r, 0.0).states) out.push_back(state_measure(r, s, 0.0, 10).measure);
    return out;
  };
  const SpherePoint zero = pt(0.0), inf = SpherePoint::infinity();

  const auto inv = states_of("1/z^2");
  c.expect(inv.size() == 1, "1/z^2: " + std::to_string(inv.size()) + " states");
  if (inv.size() == 1)
    c.expect(inv[0].size() == 2 && inv[0].mass_at(zero) == 0.5 && inv[0].mass_at(inf) == 0.5,
             "1/z^2 state is not (delta_0 + delta_inf)/2");

  const auto sq = states_of("z^2");
  c.expect(sq.size() == 2, "z^2: " + std::to_string(sq.size()) + " states");
  if (sq.size() == 2) {
    const bool a = is_dirac_at(sq[0], zero) && is_dirac_at(sq[1], inf);
    const bool b = is_dirac_at(sq[0], inf) && is_dirac_at(sq[1], zero);
    c.expect(a || b, "z^2 states are not delta_0 and delta_inf");
  }

  const auto pl = states_of("z^2+1");
  c.expect(pl.size() == 1 && is_dirac_at(pl[0], inf), "z^2+1 state is not delta_inf");
}

struct Criterion {
  int id;
  const char* title;
  std::function<void(Checker&)> run;
  double time_limit;  // seconds; 0 means none
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "1/z^2 two-point weights", criterion1, 1.0},
      {2, "z^N Dirac states and TwoFixed", criterion2, 0.0},
      {3, "z^2+1 phase structure", criterion3, 5.0},
      {4, "K1/K2 residuals for z^2+1 at depth 14", criterion4, 0.0},
      {5, "Lyubich invariance for z^2", criterion5, 10.0},
      {6, "divergence witness below log 2", criterion6, 0.0},
      {7, "Riemann-Hurwitz on random maps", criterion7, 0.0},
      {8, "tent map Hutchinson moments and KMS state", criterion8, 0.0},
      {9, "twisted Sierpinski gasket", criterion9, 0.0},
      {10, "traces at beta = 0", criterion10, 0.0},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checker c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.time_limit > 0 && secs >= cr.time_limit)
      c.failures.push_back("took " + num(secs) + " s, limit " + num(cr.time_limit) + " s");
    const bool ok = c.failures.empty();
    failed += ok ? 0 : 1;
    std::printf("%s criterion %d: %s (%.2f s)", ok ? "PASS" : "FAIL", cr.id, cr.title, secs);
    if (!c.notes.str().empty()) std::printf(" [%s]", c.notes.str().c_str());
    std::printf("\n");
    for (const auto& f : c.failures) std::printf("    %s\n", f.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
