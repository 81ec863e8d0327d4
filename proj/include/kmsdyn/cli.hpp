#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kmsdyn/error.hpp"
#include "kmsdyn/ifs.hpp"
#include "kmsdyn/kms.hpp"
#include "kmsdyn/parser.hpp"
#include "kmsdyn/ratmap.hpp"
#include "kmsdyn/report.hpp"

namespace kmsdyn::cli {

/// Everything a subcommand may read from the command line.
struct RunConfig {
  std::string map;
  std::optional<double> beta;
  bool critical = false;
  std::string beta_grid;
  std::optional<int> depth;
  std::optional<int> iters;
  std::string out;
  std::string atoms_out;
  std::string seed;
  std::string point;
  std::vector<std::string> julia;
  std::string preset;
  std::string system;
  std::string mode = "deterministic";
  std::size_t samples = 100000;
  double tol = kDefaultPointTol;
  std::optional<std::size_t> atom_budget;
  double rho = 1e-3;
};

namespace detail {

inline double parse_number(const std::string& s, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size())
    throw Error(ErrorKind::InvalidArgument, std::string(what) + ": cannot read '" + s + "' as a number");
  return v;
}

/// "x,y" or "x".
inline PlanePoint parse_plane_point(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) return {parse_number(s, "point"), 0.0};
  return {parse_number(s.substr(0, comma), "point"), parse_number(s.substr(comma + 1), "point")};
}

/// "lo:hi:step", inclusive of hi up to rounding.
inline std::vector<double> parse_grid(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3) throw Error(ErrorKind::InvalidArgument, "beta grid must look like LO:HI:STEP");
  const double lo = parse_number(parts[0], "beta grid"), hi = parse_number(parts[1], "beta grid"),
               step = parse_number(parts[2], "beta grid");
  if (!(step > 0.0) || !(hi >= lo)) throw Error(ErrorKind::InvalidArgument, "beta grid needs LO <= HI and STEP > 0");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  if (count > 100000) throw Error(ErrorKind::InvalidArgument, "beta grid has more than 100000 points");
  std::vector<double> v;
  for (std::size_t k = 0; k < count; ++k) v.push_back(lo + static_cast<double>(k) * step);
  return v;
}

inline void validate(const RunConfig& c) {
  if (!(c.tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerance must be positive");
  if (!(c.rho > 0.0)) throw Error(ErrorKind::InvalidArgument, "cutoff radius must be positive");
  if (c.depth && *c.depth < 0) throw Error(ErrorKind::InvalidArgument, "depth must be nonnegative");
  if (c.iters && *c.iters < 0) throw Error(ErrorKind::InvalidArgument, "iterations must be nonnegative");
  if (c.beta && !(std::isfinite(*c.beta) && *c.beta >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "beta must be a nonnegative number");
  if (c.atom_budget && *c.atom_budget == 0) throw Error(ErrorKind::InvalidArgument, "atom budget must be positive");
}

inline std::size_t budget(const RunConfig& c) { return c.atom_budget.value_or(default_atom_budget()); }

/// "--atoms-out a.csv" names a.csv for one measure, a_<k>.csv for several.
inline std::string atoms_path(const std::string& base, std::size_t k, std::size_t count) {
  if (count == 1) return base;
  const auto dot = base.find_last_of('.');
  const auto slash = base.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return base + "_" + std::to_string(k);
  return base.substr(0, dot) + "_" + std::to_string(k) + base.substr(dot);
}

template <class Measure>
void write_csv(const std::string& path, const Measure& mu) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
  write_atoms_csv(f, mu);
  if (!f) throw Error(ErrorKind::Io, "write to " + path + " failed");
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot read " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline Json header(const std::string& command) { return {{"schema", kSchemaVersion}, {"command", command}}; }

/// Inline atoms only when small; large measures belong in --atoms-out.
inline constexpr std::size_t kInlineAtoms = 256;

template <class Point>
void attach_measure(Json& j, const AtomicMeasure<Point>& mu, const RunConfig& c, std::size_t k, std::size_t count) {
  j["atom_count"] = mu.size();
  j["total_mass"] = mu.total_mass();
  if (!c.atoms_out.empty()) {
    const std::string path = atoms_path(c.atoms_out, k, count);
    write_csv(path, mu);
    j["atoms_ref"] = path;
  } else if (mu.size() <= kInlineAtoms) {
    j["atoms"] = measure_json(mu)["atoms"];
  }
}

inline Json warnings_json(const std::vector<std::string>& w) {
  Json a = Json::array();
  for (const auto& s : w) a.push_back(s);
  return a;
}

inline double resolve_beta(const RunConfig& c, int n) {
  if (c.critical) return std::log(static_cast<double>(n));
  if (!c.beta) throw Error(ErrorKind::Usage, "give --beta or --critical");
  return *c.beta;
}

// rat

inline Json map_json(const RunConfig& c, const RationalMap& r) {
  return {{"source", c.map},
          {"numerator", to_string(r.exact_numerator())},
          {"denominator", to_string(r.exact_denominator())},
          {"degree", r.degree()}};
}

inline Json rat_analyze(const RunConfig& c) {
  const auto r = parse_map(c.map);
  const auto b = branch_data(r, c.tol);
  const auto e = exceptional_points(r, b, c.tol);
  Json j = header("rat analyze");
  j["map"] = map_json(c, r);
  j["degree"] = r.degree();
  Json bps = Json::array();
  for (const auto& bp : b.branch_points) bps.push_back({{"point", point_json(bp.point)}, {"index", bp.index}});
  j["branch_points"] = bps;
  j["branch_values"] = points_json(b.branch_values);
  Json classes = Json::array();
  for (const auto& cl : e.orbit_classes) classes.push_back(points_json(cl));
  j["exceptional"] = {{"points", points_json(e.points)}, {"case", std::string(to_string(e.case_tag))},
                      {"orbit_classes", classes}};
  return j;
}

inline std::vector<SpherePoint> julia_points(const RunConfig& c) {
  std::vector<SpherePoint> v;
  for (const auto& s : c.julia) v.push_back(parse_point(s));
  return v;
}

inline Json state_anchor_json(const ExtremeState<SpherePoint>& s) {
  if (s.kind == StateKind::InfiniteType) return "lyubich";
  if (s.anchors.size() == 1) return point_json(s.anchors[0]);
  return points_json(s.anchors);
}

inline Json rat_kms(const RunConfig& c) {
  const auto r = parse_map(c.map);
  const double beta = resolve_beta(c, r.degree());
  const auto lib = TestFunctionLibrary::sphere();
  const auto branch = branch_point_list(branch_data(r, c.tol));
  KMSOptions opt;
  opt.auto_depth = !c.depth;
  opt.atom_budget = budget(c);
  opt.tol = c.tol;
  const int depth = c.depth.value_or(10);
  // the checks pull the measure back once more
  const std::size_t check_budget = budget(c) * static_cast<std::size_t>(r.degree());

  PhaseReport<SpherePoint> rep;
  if (!c.point.empty()) {
    rep.beta = beta;
    rep.regime = regime_of(beta, r.degree(), c.critical);
    rep.states.push_back({StateKind::FiniteType, {parse_point(c.point)}});
  } else if (!c.julia.empty()) {
    rep = classify_julia(r, beta, julia_points(c), c.critical, c.tol);
  } else {
    rep = classify(r, beta, c.critical, c.tol);
  }

  Json j = header("rat kms");
  j["map"] = map_json(c, r);
  j["beta"] = rep.beta;
  j["regime"] = std::string(to_string(rep.regime));
  j["library"] = {{"degree", 4}, {"size", lib.size()}, {"norm", lib.norm()}};
  Json states = Json::array();
  const std::size_t count = rep.states.size();
  for (std::size_t k = 0; k < count; ++k) {
    const auto& s = rep.states[k];
    KMSMeasure<SpherePoint> m;
    if (s.kind == StateKind::InfiniteType) {
      const SpherePoint seed = c.seed.empty() ? from_affine(complex(0.5, 0.25)) : parse_point(c.seed);
      m = state_measure(r, s, rep.beta, c.iters.value_or(12), opt, seed);
    } else {
      m = state_measure(r, s, rep.beta, depth, opt);
    }
    Json st{{"kind", std::string(to_string(s.kind))}, {"anchor", state_anchor_json(s)}};
    if (s.kind == StateKind::InfiniteType) {
      st["seed"] = point_json(m.anchor);
      st["iterations"] = m.truncation_depth;
      st["invariance_residual"] = lyubich_invariance_residual(r, m.measure, lib);
    } else {
      st["normalization"] = m.normalization;
      st["tail_bound"] = m.tail_bound;
      st["truncation_depth"] = m.truncation_depth;
      st["closed_form"] = m.closed_form;
    }
    st["k1"] = trace_check_json(check_K1(RationalSystem(r, c.tol), branch, m.measure, rep.beta, lib, c.rho, check_budget),
                                lib, true);
    st["k2"] = trace_check_json(check_K2(RationalSystem(r, c.tol), m.measure, rep.beta, lib, check_budget), lib, false);
    st["warnings"] = warnings_json(m.warnings);
    attach_measure(st, m.measure, c, k, count);
    states.push_back(st);
  }
  j["states"] = states;
  j["counts"] = {{"finite", rep.finite_count}, {"infinite", rep.infinite_count}};
  j["warnings"] = warnings_json(rep.warnings);
  return j;
}

inline Json rat_lyubich(const RunConfig& c) {
  const auto r = parse_map(c.map);
  const SpherePoint seed = c.seed.empty() ? from_affine(complex(0.5, 0.25)) : parse_point(c.seed);
  const int n = c.iters.value_or(12);
  const auto mu = lyubich(r, seed, n, budget(c), c.tol);
  std::array<double, 3> moment{0.0, 0.0, 0.0};
  for (const auto& a : mu.atoms()) {
    const auto e = embedding(a.point);
    for (int i = 0; i < 3; ++i) moment[i] += a.weight * e[i];
  }
  Json j = header("rat lyubich");
  j["map"] = map_json(c, r);
  j["seed"] = point_json(seed);
  j["iterations"] = n;
  j["first_moment"] = Json::array({moment[0], moment[1], moment[2]});
  j["invariance_residual"] = lyubich_invariance_residual(r, mu, TestFunctionLibrary::sphere());
  attach_measure(j, mu, c, 0, 1);
  return j;
}

inline std::vector<double> beta_list(const RunConfig& c, int n) {
  std::vector<double> betas;
  if (!c.beta_grid.empty()) betas = parse_grid(c.beta_grid);
  if (c.beta) betas.push_back(*c.beta);
  if (betas.empty() && !c.critical) throw Error(ErrorKind::Usage, "give --beta-grid, --beta or --critical");
  for (double b : betas)
    if (!(b >= 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be nonnegative");
  (void)n;
  return betas;
}

template <class Point>
Json phase_json(const PhaseReport<Point>& p) {
  Json states = Json::array();
  for (const auto& s : p.states) {
    Json anchor;
    if (s.kind == StateKind::InfiniteType) anchor = std::is_same_v<Point, SpherePoint> ? "lyubich" : "hutchinson";
    else if (s.anchors.size() == 1) anchor = point_json(s.anchors[0]);
    else anchor = points_json(s.anchors);
    states.push_back({{"kind", std::string(to_string(s.kind))}, {"anchor", anchor}});
  }
  return {{"beta", p.beta},
          {"regime", std::string(to_string(p.regime))},
          {"states", states},
          {"counts", {{"finite", p.finite_count}, {"infinite", p.infinite_count}}},
          {"warnings", warnings_json(p.warnings)}};
}

inline Json rat_phase(const RunConfig& c) {
  const auto r = parse_map(c.map);
  const auto betas = beta_list(c, r.degree());
  const auto jp = julia_points(c);
  Json reports = Json::array();
  auto one = [&](double b, bool crit) {
    reports.push_back(phase_json(jp.empty() && c.julia.empty() ? classify(r, b, crit, c.tol)
                                                                : classify_julia(r, b, jp, crit, c.tol)));
  };
  for (double b : betas) one(b, false);
  if (c.critical) one(std::log(static_cast<double>(r.degree())), true);
  Json j = header("rat phase");
  j["map"] = map_json(c, r);
  j["log_n"] = std::log(static_cast<double>(r.degree()));
  j["julia_branch_points"] = points_json(jp);
  j["reports"] = reports;
  return j;
}

inline Json rat_witness(const RunConfig& c) {
  const auto r = parse_map(c.map);
  if (c.point.empty()) throw Error(ErrorKind::Usage, "give --point");
  if (!c.beta) throw Error(ErrorKind::Usage, "give --beta");
  const auto w = divergence_witness(r, parse_point(c.point), *c.beta, c.depth.value_or(10), 3, budget(c), c.tol);
  Json j = header("rat witness");
  j["map"] = map_json(c, r);
  j["point"] = point_json(w.z);
  j["witness"] = point_json(w.witness);
  j["witness_level"] = w.level;
  j["beta"] = w.beta;
  j["depth"] = w.depth;
  j["level_sizes"] = w.level_sizes;
  j["partial_sums"] = w.partial_sums;
  j["certified_mass_ratio"] = w.certified_mass_ratio;
  return j;
}

// ifs

inline IFSSystem load_system(const RunConfig& c) {
  if (!c.preset.empty() && !c.system.empty()) throw Error(ErrorKind::Usage, "give only one of --preset and --system");
  if (!c.preset.empty()) return ifs_preset(c.preset);
  if (!c.system.empty()) return parse_ifs_system(read_file(c.system));
  throw Error(ErrorKind::Usage, "give --preset or --system");
}

inline Json system_json(const IFSSystem& g) {
  Json maps = Json::array();
  for (const auto& m : g.maps()) {
    if (g.dim() == 1) {
      maps.push_back({{"linear", m.linear[0][0]}, {"offset", m.offset.x}});
    } else {
      maps.push_back({{"linear", Json::array({Json::array({m.linear[0][0], m.linear[0][1]}),
                                              Json::array({m.linear[1][0], m.linear[1][1]})})},
                      {"offset", point_json(m.offset)}});
    }
  }
  return {{"name", g.name()}, {"dim", g.dim()}, {"maps", maps}, {"c1", g.c1()}, {"c2", g.c2()}};
}

inline Json orbit_json(const OrbitConditionReport& rep) {
  Json a = Json::array();
  for (const auto& cert : rep.certificates) {
    Json e{{"branch_value", point_json(cert.y)}, {"status", std::string(to_string(cert.status))}};
    if (cert.witness) {
      e["witness"] = point_json(*cert.witness);
      e["witness_level"] = cert.witness_level;
    }
    a.push_back(e);
  }
  return a;
}

inline Json ifs_analyze(const RunConfig& c) {
  const auto g = load_system(c);
  const auto bd = branch_structure(g);
  const int depth = c.depth.value_or(10);
  Json j = header("ifs analyze");
  j["system"] = system_json(g);
  j["attractor_depth"] = bd.attractor_depth;
  Json values = Json::array();
  for (const auto& v : bd.branch_values) {
    Json pairs = Json::array();
    for (const auto& [a, b] : v.pairs) pairs.push_back(Json::array({a, b}));
    values.push_back({{"point", point_json(v.y)}, {"pairs", pairs}});
  }
  j["branch_values"] = values;
  j["branch_points"] = points_json(bd.branch_points);
  Json singular = Json::array();
  for (const auto& s : bd.singular_pairs)
    singular.push_back({{"maps", Json::array({s.j, s.k})}, {"degenerate", s.degenerate}});
  j["singular_pairs"] = singular;
  const auto oc = orbit_condition(g, bd, depth);
  j["orbit_condition"] = {{"depth", depth}, {"certified", oc.all_certified()}, {"branch_values", orbit_json(oc)}};
  return j;
}

inline HutchinsonOptions hutchinson_options(const RunConfig& c) {
  HutchinsonOptions opt;
  if (c.mode == "deterministic") opt.mode = HutchinsonMode::Deterministic;
  else if (c.mode == "chaos" || c.mode == "chaos-game") opt.mode = HutchinsonMode::ChaosGame;
  else throw Error(ErrorKind::InvalidArgument, "mode must be deterministic or chaos");
  opt.samples = c.samples;
  if (opt.mode == HutchinsonMode::ChaosGame && opt.samples == 0)
    throw Error(ErrorKind::InvalidArgument, "chaos game needs at least one sample");
  if (!c.seed.empty()) {
    std::size_t used = 0;
    try {
      opt.seed = std::stoull(c.seed, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != c.seed.size()) throw Error(ErrorKind::InvalidArgument, "seed must be an unsigned integer");
  }
  if (!c.point.empty()) opt.x0 = parse_plane_point(c.point);
  opt.atom_budget = budget(c);
  return opt;
}

inline Json ifs_hutchinson(const RunConfig& c) {
  const auto g = load_system(c);
  const auto opt = hutchinson_options(c);
  const int n = c.iters.value_or(10);
  const auto h = hutchinson(g, opt.mode == HutchinsonMode::ChaosGame ? 0 : n, opt);
  double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
  for (const auto& a : h.measure.atoms()) {
    const auto& p = a.point;
    mx += a.weight * p.x;
    my += a.weight * p.y;
    mxx += a.weight * p.x * p.x;
    myy += a.weight * p.y * p.y;
    mxy += a.weight * p.x * p.y;
  }
  Json j = header("ifs hutchinson");
  j["system"] = system_json(g);
  j["mode"] = std::string(to_string(h.mode));
  j["x0"] = point_json(h.x0);
  if (h.mode == HutchinsonMode::ChaosGame) {
    j["samples"] = h.samples;
    j["seed"] = h.seed;
    j["burn_in"] = opt.burn_in;
  } else {
    j["iterations"] = h.iterations;
    j["pruned_radius"] = h.pruned_radius;
  }
  j["moments"] = {{"x", mx}, {"y", my}, {"xx", mxx}, {"yy", myy}, {"xy", mxy}};
  attach_measure(j, h.measure, c, 0, 1);
  return j;
}

inline Json ifs_kms(const RunConfig& c) {
  const auto g = load_system(c);
  const auto bd = branch_structure(g);
  const double beta = resolve_beta(c, g.degree());
  const auto lib = plane_library(g);
  const std::size_t check_budget = budget(c) * static_cast<std::size_t>(g.degree());
  PhaseReport<PlanePoint> rep;
  if (!c.point.empty()) {
    rep.beta = beta;
    rep.regime = regime_of(beta, g.degree(), c.critical);
    rep.states.push_back({StateKind::FiniteType, {parse_plane_point(c.point)}});
  } else {
    rep = classify_ifs(g, bd, beta, c.critical);
  }
  Json j = header("ifs kms");
  j["system"] = system_json(g);
  j["beta"] = rep.beta;
  j["regime"] = std::string(to_string(rep.regime));
  j["library"] = {{"degree", 4}, {"size", lib.size()}, {"norm", lib.norm()}};
  Json states = Json::array();
  const std::size_t count = rep.states.size();
  for (std::size_t k = 0; k < count; ++k) {
    const auto& s = rep.states[k];
    Json st{{"kind", std::string(to_string(s.kind))}};
    PlaneMeasure mu;
    if (s.kind == StateKind::InfiniteType) {
      auto opt = hutchinson_options(c);
      opt.mode = HutchinsonMode::Deterministic;
      const auto h = hutchinson(g, c.iters.value_or(10), opt);
      mu = h.measure;
      st["anchor"] = "hutchinson";
      st["iterations"] = h.iterations;
    } else {
      const auto m = kms_measure_ifs(g, bd, s.anchors.at(0), rep.beta, c.depth.value_or(-1), budget(c));
      mu = m.measure;
      st["anchor"] = point_json(m.anchor);
      st["normalization"] = m.normalization;
      st["tail_bound"] = m.tail_bound;
      st["truncation_depth"] = m.truncation_depth;
      st["warnings"] = warnings_json(m.warnings);
    }
    st["k1"] = trace_check_json(check_K1(g, bd.branch_points, mu, rep.beta, lib, c.rho, check_budget), lib, true);
    st["k2"] = trace_check_json(check_K2(g, mu, rep.beta, lib, check_budget), lib, false);
    attach_measure(st, mu, c, k, count);
    states.push_back(st);
  }
  j["states"] = states;
  j["counts"] = {{"finite", rep.finite_count}, {"infinite", rep.infinite_count}};
  j["warnings"] = warnings_json(rep.warnings);
  return j;
}

inline Json ifs_classify(const RunConfig& c) {
  const auto g = load_system(c);
  const auto bd = branch_structure(g);
  const auto betas = beta_list(c, g.degree());
  Json reports = Json::array();
  for (double b : betas) reports.push_back(phase_json(classify_ifs(g, bd, b, false, c.depth.value_or(10))));
  if (c.critical) reports.push_back(phase_json(classify_ifs(g, bd, 0.0, true, c.depth.value_or(10))));
  Json j = header("ifs classify");
  j["system"] = system_json(g);
  j["log_n"] = std::log(static_cast<double>(g.degree()));
  j["branch_points"] = points_json(bd.branch_points);
  j["reports"] = reports;
  return j;
}

inline void error_json(std::ostream& err, ErrorKind kind, const std::string& detail) {
  err << Json{{"error", {{"kind", std::string(to_string(kind))}, {"detail", detail}}}}.dump() << "\n";
}

}  // namespace detail

/// Runs one command line (args[0] is the program name).  JSON goes to `out`
/// or --out, errors to `err` as {"error": {"kind", "detail"}}.  Returns the
/// process exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"KMS phase portraits for rational maps and affine IFS", "kmsdyn"};
  app.require_subcommand(1);
  auto* rat = app.add_subcommand("rat", "rational maps on the Riemann sphere");
  auto* ifs = app.add_subcommand("ifs", "affine iterated function systems");
  rat->require_subcommand(1);
  ifs->require_subcommand(1);

  auto common = [&](CLI::App* s) {
    s->add_option("--out", c.out, "write the JSON report here instead of stdout");
    s->add_option("--atoms-out", c.atoms_out, "CSV file for measure atoms");
    s->add_option("--tol", c.tol, "point tolerance");
    s->add_option("--atom-budget", c.atom_budget, "maximum atoms per measure (default $KMSDYN_ATOM_BUDGET or 2e6)");
  };
  auto map_opt = [&](CLI::App* s) { s->add_option("--map", c.map, "rational map in z, e.g. \"z^2+1\"")->required(); };
  auto beta_opts = [&](CLI::App* s) {
    auto* b = s->add_option("--beta", c.beta, "inverse temperature");
    auto* k = s->add_flag("--critical", c.critical, "use beta = log N exactly");
    b->excludes(k);
  };
  auto system_opts = [&](CLI::App* s) {
    s->add_option("--preset", c.preset, "tent, binary, sierpinski or sierpinski-twisted");
    s->add_option("--system", c.system, "JSON file describing the maps");
  };

  auto* r_an = rat->add_subcommand("analyze", "branch points and exceptional set");
  map_opt(r_an);
  common(r_an);
  auto* r_kms = rat->add_subcommand("kms", "KMS measures with K1/K2 residuals");
  map_opt(r_kms);
  beta_opts(r_kms);
  common(r_kms);
  r_kms->add_option("--depth", c.depth, "truncation depth (automatic when absent)");
  r_kms->add_option("--point", c.point, "construct only the state anchored here");
  r_kms->add_option("--iters", c.iters, "Lyubich iterations at log N");
  r_kms->add_option("--seed", c.seed, "Lyubich seed point");
  r_kms->add_option("--julia", c.julia, "branch point asserted to lie in the Julia set (repeatable)");
  r_kms->add_option("--rho", c.rho, "K1 cutoff radius");
  auto* r_ly = rat->add_subcommand("lyubich", "Lyubich measure approximant");
  map_opt(r_ly);
  common(r_ly);
  r_ly->add_option("--seed", c.seed, "seed point");
  r_ly->add_option("--iters", c.iters, "number of index-weighted pullbacks");
  auto* r_ph = rat->add_subcommand("phase", "extreme states over a beta grid");
  map_opt(r_ph);
  beta_opts(r_ph);
  common(r_ph);
  r_ph->add_option("--beta-grid", c.beta_grid, "LO:HI:STEP");
  r_ph->add_option("--julia", c.julia, "branch point asserted to lie in the Julia set (repeatable)");
  auto* r_wi = rat->add_subcommand("witness", "certify that no K2 measure charges a point below log N");
  map_opt(r_wi);
  common(r_wi);
  r_wi->add_option("--point", c.point, "the point z")->required();
  r_wi->add_option("--beta", c.beta, "inverse temperature, 0 < beta < log N")->required();
  r_wi->add_option("--depth", c.depth, "backward-orbit depth");

  auto* i_an = ifs->add_subcommand("analyze", "branch structure and orbit condition");
  system_opts(i_an);
  common(i_an);
  i_an->add_option("--depth", c.depth, "orbit search depth");
  auto* i_kms = ifs->add_subcommand("kms", "KMS measures with K1/K2 residuals");
  system_opts(i_kms);
  beta_opts(i_kms);
  common(i_kms);
  i_kms->add_option("--depth", c.depth, "word length (automatic when absent)");
  i_kms->add_option("--point", c.point, "branch point x or x,y");
  i_kms->add_option("--iters", c.iters, "Hutchinson iterations at log N");
  i_kms->add_option("--rho", c.rho, "K1 cutoff radius");
  auto* i_hu = ifs->add_subcommand("hutchinson", "Hutchinson measure approximant");
  system_opts(i_hu);
  common(i_hu);
  i_hu->add_option("--iters", c.iters, "deterministic iterations");
  i_hu->add_option("--mode", c.mode, "deterministic or chaos");
  i_hu->add_option("--samples", c.samples, "chaos-game samples");
  i_hu->add_option("--seed", c.seed, "chaos-game seed");
  i_hu->add_option("--point", c.point, "start point x or x,y");
  auto* i_cl = ifs->add_subcommand("classify", "extreme states");
  system_opts(i_cl);
  beta_opts(i_cl);
  common(i_cl);
  i_cl->add_option("--beta-grid", c.beta_grid, "LO:HI:STEP");
  i_cl->add_option("--depth", c.depth, "orbit search depth");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    detail::error_json(err, ErrorKind::Usage, e.what());
    return exit_code(ErrorKind::Usage);
  }

  try {
    detail::validate(c);
    Json j;
    if (r_an->parsed()) j = detail::rat_analyze(c);
    else if (r_kms->parsed()) j = detail::rat_kms(c);
    else if (r_ly->parsed()) j = detail::rat_lyubich(c);
    else if (r_ph->parsed()) j = detail::rat_phase(c);
    else if (r_wi->parsed()) j = detail::rat_witness(c);
    else if (i_an->parsed()) j = detail::ifs_analyze(c);
    else if (i_kms->parsed()) j = detail::ifs_kms(c);
    else if (i_hu->parsed()) j = detail::ifs_hutchinson(c);
    else if (i_cl->parsed()) j = detail::ifs_classify(c);
    else throw Error(ErrorKind::Usage, "no command given");

    if (c.out.empty()) {
      write_json(out, j);
    } else {
      std::ofstream f(c.out);
      if (!f) throw Error(ErrorKind::Io, "cannot write " + c.out);
      write_json(f, j);
      if (!f) throw Error(ErrorKind::Io, "write to " + c.out + " failed");
    }
    return 0;
  } catch (const Error& e) {
    detail::error_json(err, e.kind(), e.detail());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << Json{{"error", {{"kind", "Unexpected"}, {"detail", e.what()}}}}.dump() << "\n";
    return 1;
  }
}

inline int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace kmsdyn::cli
