#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "kmsdyn/parser.hpp"
#include "kmsdyn/ratmap.hpp"

using namespace kmsdyn;

namespace {

bool near(const SpherePoint& a, const SpherePoint& b, double tol = 1e-9) { return chordal_distance(a, b) <= tol; }
bool near(const SpherePoint& a, complex b, double tol = 1e-9) { return near(a, from_affine(b), tol); }

int fibre_total(const std::vector<FibrePoint<SpherePoint>>& f) {
  int t = 0;
  for (const auto& x : f) t += x.multiplicity;
  return t;
}

int riemann_hurwitz_sum(const BranchData& b) {
  int t = 0;
  for (const auto& bp : b.branch_points) t += bp.index - 1;
  return t;
}

/// Random exact map with small integer coefficients; retries until coprime
/// and of the requested degree.
RationalMap random_exact_map(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> c(-4, 4);
  std::uniform_int_distribution<int> dq(0, n);
  for (;;) {
    const int qdeg = dq(rng);
    const bool p_full = qdeg < n || (rng() & 1u);
    const int pdeg = p_full ? n : std::uniform_int_distribution<int>(0, n)(rng);
    std::vector<GaussianRational> p(static_cast<std::size_t>(pdeg) + 1), q(static_cast<std::size_t>(qdeg) + 1);
    for (auto& x : p) x = GaussianRational(rational(c(rng), 1 + (rng() % 3)), rational(c(rng)));
    for (auto& x : q) x = GaussianRational(rational(c(rng), 1 + (rng() % 3)), rational(c(rng)));
    const ExactPoly P(p), Q(q);
    if (P.is_zero() || Q.is_zero() || std::max(P.degree(), Q.degree()) != n) continue;
    if (gcd(P, Q).degree() > 0) continue;
    return RationalMap(P, Q);
  }
}

SpherePoint random_point(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return from_affine(complex(g(rng), g(rng)) * std::exp(g(rng)));
}

}  // namespace

TEST_CASE("evaluate examples", "[ratmap]") {
  CHECK(evaluate(parse_map("z^2"), infinity()).is_infinity());
  CHECK(evaluate(parse_map("z^-2"), from_affine(0.0)).is_infinity());
  CHECK(evaluate(parse_map("z^-2"), infinity()) == from_affine(0.0));
  CHECK(near(evaluate(parse_map("z^2+1"), from_affine(2.0)), 5.0, 1e-15));
  CHECK(near(evaluate(parse_map("(z^3-16/27)/z"), from_affine(1.0)), 11.0 / 27.0, 1e-15));
}

TEST_CASE("maps of degree below two are rejected", "[ratmap]") {
  CHECK_THROWS_MATCHES(parse_map("z+1"), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.kind() == ErrorKind::DegreeTooLow;
                       }));
  CHECK_THROWS_MATCHES(parse_map("(z^2-1)/(z-1)"), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.kind() == ErrorKind::DegreeTooLow;
                       }));
}

TEST_CASE("preimages examples", "[ratmap]") {
  auto f = preimages(parse_map("z^2"), from_affine(1.0));
  REQUIRE(f.size() == 2);
  CHECK(near(f[0].point, -1.0));
  CHECK(f[0].multiplicity == 1);
  CHECK(near(f[1].point, 1.0));

  f = preimages(parse_map("z^2"), from_affine(0.0));
  REQUIRE(f.size() == 1);
  CHECK(f[0].point == from_affine(0.0));
  CHECK(f[0].multiplicity == 2);

  f = preimages(parse_map("z^2+1"), from_affine(1.0));
  REQUIRE(f.size() == 1);
  CHECK(near(f[0].point, 0.0));
  CHECK(f[0].multiplicity == 2);

  f = preimages(parse_map("z^2+1"), infinity());
  REQUIRE(f.size() == 1);
  CHECK(f[0].point.is_infinity());
  CHECK(f[0].multiplicity == 2);

  f = preimages(parse_map("1/z^2"), from_affine(0.0));
  REQUIRE(f.size() == 1);
  CHECK(f[0].point.is_infinity());
}

TEST_CASE("branch_data examples", "[ratmap]") {
  for (int n : {2, 3, 5}) {
    const auto b = branch_data(parse_map("z^" + std::to_string(n)));
    REQUIRE(b.branch_points.size() == 2);
    CHECK(b.branch_points[0].point == from_affine(0.0));
    CHECK(b.branch_points[0].index == n);
    CHECK(b.branch_points[1].point.is_infinity());
    CHECK(b.branch_points[1].index == n);
    REQUIRE(b.branch_values.size() == 2);
  }

  const auto b = branch_data(parse_map("z^2+1"));
  REQUIRE(b.branch_points.size() == 2);
  CHECK(near(b.branch_points[0].point, 0.0));
  CHECK(b.branch_points[1].point.is_infinity());
  REQUIRE(b.branch_values.size() == 2);
  bool has_one = false, has_inf = false;
  for (const auto& v : b.branch_values) {
    has_one = has_one || near(v, 1.0);
    has_inf = has_inf || v.is_infinity();
  }
  CHECK(has_one);
  CHECK(has_inf);

  const auto b2 = branch_data(parse_map("1/z^2"));
  REQUIRE(b2.branch_points.size() == 2);
  CHECK(b2.branch_points[0].index == 2);
  CHECK(b2.branch_points[1].index == 2);

  // (z^3-16/27)/z: critical points -2/3 (double preimage) and infinity (index 2).
  const auto b3 = branch_data(parse_map("(z^3-16/27)/z"));
  CHECK(riemann_hurwitz_sum(b3) == 4);
  CHECK(branch_index(b3, from_affine(-2.0 / 3.0), 1e-9) == 2);
  CHECK(branch_index(b3, infinity()) == 2);
}

TEST_CASE("exceptional_points examples", "[ratmap]") {
  auto e = exceptional_points(parse_map("z^3"));
  CHECK(e.case_tag == ExceptionalCase::TwoFixed);
  REQUIRE(e.points.size() == 2);
  CHECK(e.contains(from_affine(0.0)));
  CHECK(e.contains(infinity()));
  CHECK(e.orbit_classes.size() == 2);

  e = exceptional_points(parse_map("z^-3"));
  CHECK(e.case_tag == ExceptionalCase::TwoSwapped);
  CHECK(e.points.size() == 2);
  CHECK(e.orbit_classes.size() == 1);

  e = exceptional_points(parse_map("z^2+1"));
  CHECK(e.case_tag == ExceptionalCase::OneFixed);
  REQUIRE(e.points.size() == 1);
  CHECK(e.points[0].is_infinity());

  e = exceptional_points(parse_map("(z^3-16/27)/z"));
  CHECK(e.case_tag == ExceptionalCase::Empty);
}

TEST_CASE("forward_orbit examples", "[ratmap]") {
  auto o = forward_orbit(parse_map("z^2"), from_affine(2.0), 3);
  REQUIRE(o.size() == 4);
  CHECK(near(o[3], 256.0, 1e-15));
  o = forward_orbit(parse_map("z^-2"), from_affine(0.0), 2);
  CHECK(o[1].is_infinity());
  CHECK(o[2] == from_affine(0.0));
  o = forward_orbit(parse_map("z^2+1"), from_affine(0.0), 3);
  CHECK(near(o[3], 5.0, 1e-15));
}

TEST_CASE("backward_orbit examples", "[ratmap]") {
  auto t = backward_orbit(parse_map("z^2"), from_affine(1.0), 2, OrbitWeighting::IndexWeighted);
  REQUIRE(t.levels.size() == 3);
  REQUIRE(t.levels[2].size() == 4);
  for (const auto& a : t.levels[2]) {
    CHECK(a.weight == Catch::Approx(0.25).margin(1e-15));
    CHECK(std::abs(std::pow(a.point.affine(), 4) - 1.0) < 1e-12);
  }

  t = backward_orbit(parse_map("z^2"), from_affine(0.0), 2, OrbitWeighting::SetCount);
  REQUIRE(t.levels.size() == 3);
  for (const auto& lvl : t.levels) {
    REQUIRE(lvl.size() == 1);
    CHECK(lvl[0].point == from_affine(0.0));
    CHECK(lvl[0].weight == 1.0);
  }

  t = backward_orbit(parse_map("z^2+1"), from_affine(0.0), 1, OrbitWeighting::SetCount);
  REQUIRE(t.levels[1].size() == 2);
  CHECK(near(t.levels[1][0].point, complex(0, -1)));
  CHECK(near(t.levels[1][1].point, complex(0, 1)));

  CHECK_THROWS_MATCHES(backward_orbit(parse_map("z^2"), from_affine(0.0), 2, OrbitWeighting::IndexWeighted), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.kind() == ErrorKind::ExceptionalSeed;
                       }));

  t = backward_orbit(parse_map("z^2"), from_affine(2.0), 10, OrbitWeighting::SetCount, 100);
  CHECK(t.truncated);
  CHECK(t.total_atoms <= 100);
}

TEST_CASE("fibre degrees sum to N and preimages map back", "[ratmap][property]") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = random_exact_map(rng, 2 + trial % 4);
    for (int k = 0; k < 100; ++k) {
      const auto y = random_point(rng);
      const auto f = preimages(r, y);
      CHECK(fibre_total(f) == r.degree());
      for (const auto& x : f) CHECK(chordal_distance(r(x.point), y) <= 1e-7);
    }
  }
}

TEST_CASE("Riemann-Hurwitz count on random exact maps", "[ratmap][property]") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 4;
    const auto r = random_exact_map(rng, n);
    const auto b = branch_data(r);
    CHECK(riemann_hurwitz_sum(b) == 2 * n - 2);
    const auto e = exceptional_points(r, b);
    CHECK(e.points.size() <= 2);
    for (const auto& p : e.points) CHECK(branch_index(b, p, 1e-6) == n);
  }
}

TEST_CASE("Riemann-Hurwitz count with higher-order critical points", "[ratmap][property]") {
  // (z^4 + z^3)/(..): compose powers so indices above 2 occur away from 0 and infinity.
  for (const char* src : {"(z-1)^3*(z+2)/(z^2+1)^2", "((z-1)/(z+1))^4", "(z^3-16/27)/z", "z^5-2*z^3", "1/(z-i)^3+z"}) {
    const auto r = parse_map(src);
    const auto b = branch_data(r);
    CHECK(riemann_hurwitz_sum(b) == 2 * r.degree() - 2);
  }
}

TEST_CASE("SetCount levels match brute-force recursion", "[ratmap][property]") {
  std::mt19937_64 rng(31);
  for (const char* src : {"z^2", "z^2+1", "(z^3-16/27)/z", "1/z^2", "z^2-1"}) {
    const auto r = parse_map(src);
    for (int k = 0; k < 3; ++k) {
      const auto y = k == 0 ? from_affine(0.0) : random_point(rng);
      const int depth = 4;
      const auto t = backward_orbit(r, y, depth, OrbitWeighting::SetCount);
      // Oracle: enumerate all backward paths through distinct preimages.
      std::vector<SpherePoint> frontier{y};
      for (int lvl = 1; lvl <= depth; ++lvl) {
        std::vector<SpherePoint> next;
        for (const auto& p : frontier)
          for (const auto& f : preimages(r, p)) next.push_back(f.point);
        frontier = next;
        const auto cl = cluster(frontier, 1e-8);
        REQUIRE(cl.size() == t.levels[static_cast<std::size_t>(lvl)].size());
        for (const auto& c : cl) {
          double w = -1.0;
          for (const auto& a : t.levels[static_cast<std::size_t>(lvl)])
            if (chordal_distance(a.point, c.representative) <= 1e-8) w = a.weight;
          CHECK(w == static_cast<double>(c.multiplicity));
        }
        for (const auto& a : t.levels[static_cast<std::size_t>(lvl)]) {
          bool maps_down = false;
          for (const auto& b : t.levels[static_cast<std::size_t>(lvl - 1)])
            maps_down = maps_down || chordal_distance(r(a.point), b.point) <= 1e-6;
          CHECK(maps_down);
        }
      }
    }
  }
}
