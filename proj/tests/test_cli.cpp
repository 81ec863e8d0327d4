#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "kmsdyn/cli.hpp"

using namespace kmsdyn;
using Catch::Matchers::WithinAbs;

namespace {

struct Outcome {
  int code;
  std::string out, err;
  Json json() const { return Json::parse(out); }
  Json error() const { return Json::parse(err); }
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "kmsdyn");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "kmsdyn_cli_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("rat analyze on z^2", "[cli]") {
  const auto o = invoke({"rat", "analyze", "--map", "z^2"});
  REQUIRE(o.code == 0);
  const auto j = o.json();
  CHECK(j["schema"] == 1);
  CHECK(j["command"] == "rat analyze");
  CHECK(j["degree"] == 2);
  CHECK(j["exceptional"]["case"] == "TwoFixed");
  REQUIRE(j["branch_points"].size() == 2);
  std::set<std::string> pts;
  for (const auto& bp : j["branch_points"]) {
    CHECK(bp["index"] == 2);
    pts.insert(bp["point"].dump());
  }
  CHECK(pts == std::set<std::string>{"[0,0]", "\"inf\""});
}

TEST_CASE("rat kms on 1/z^2 gives the two-point weights", "[cli]") {
  const auto o = invoke({"rat", "kms", "--map", "1/z^2", "--beta", "1.0"});
  REQUIRE(o.code == 0);
  const auto j = o.json();
  REQUIRE(j["states"].size() == 2);
  const double e = std::exp(1.0);
  for (const auto& s : j["states"]) {
    REQUIRE(s["atoms"].size() == 2);
    // the anchor carries the larger weight
    CHECK(s["atoms"][0]["point"] == s["anchor"]);
    CHECK_THAT(s["atoms"][0]["weight"].get<double>(), WithinAbs(e / (e + 1), 1e-12));
    CHECK_THAT(s["atoms"][1]["weight"].get<double>(), WithinAbs(1 / (e + 1), 1e-12));
    CHECK(s["k2"]["max_residual"].get<double>() < 1e-12);
  }
}

TEST_CASE("ifs classify on the twisted Sierpinski gasket", "[cli]") {
  const auto o = invoke({"ifs", "classify", "--preset", "sierpinski-twisted", "--beta", "1.5"});
  REQUIRE(o.code == 0);
  const auto j = o.json();
  REQUIRE(j["reports"].size() == 1);
  CHECK(j["reports"][0]["counts"]["finite"] == 3);
  CHECK(j["reports"][0]["states"].size() == 3);
  CHECK(j["branch_points"].size() == 3);
}

TEST_CASE("rat phase over a grid and the critical point", "[cli]") {
  const auto o = invoke({"rat", "phase", "--map", "z^2+1", "--beta-grid", "0.3:1.5:0.3", "--critical"});
  REQUIRE(o.code == 0);
  const auto reps = o.json()["reports"];
  REQUIRE(reps.size() == 6);
  const std::vector<std::size_t> expected{1, 1, 2, 2, 2, 2};
  for (std::size_t i = 0; i < reps.size(); ++i) CHECK(reps[i]["states"].size() == expected[i]);
  CHECK(reps[5]["regime"] == "critical");
  CHECK(reps[5]["counts"]["infinite"] == 1);
}

TEST_CASE("rat lyubich and rat witness", "[cli]") {
  const auto l = invoke({"rat", "lyubich", "--map", "z^2", "--seed", "2", "--iters", "10"});
  REQUIRE(l.code == 0);
  const auto lj = l.json();
  CHECK(lj["atom_count"] == 1024);
  CHECK(std::abs(lj["first_moment"][0].get<double>()) < 1e-10);
  CHECK(!lj.contains("atoms"));  // too many to inline

  const auto w = invoke({"rat", "witness", "--map", "z^2", "--point", "1", "--beta", "0.5", "--depth", "12"});
  REQUIRE(w.code == 0);
  const auto wj = w.json();
  double geometric = 0.0;
  for (int n = 0; n <= 12; ++n) geometric += std::pow(2 * std::exp(-0.5), n);
  CHECK(wj["certified_mass_ratio"].get<double>() >= geometric * (1 - 1e-12));
  CHECK(wj["level_sizes"].size() == 13);
}

TEST_CASE("ifs analyze, kms and hutchinson", "[cli]") {
  const auto a = invoke({"ifs", "analyze", "--preset", "sierpinski-twisted"});
  REQUIRE(a.code == 0);
  CHECK(a.json()["orbit_condition"]["certified"] == true);

  const auto k = invoke({"ifs", "kms", "--preset", "tent", "--beta", format_double(std::log(4.0)), "--depth", "12"});
  REQUIRE(k.code == 0);
  const auto s = k.json()["states"];
  REQUIRE(s.size() == 1);
  CHECK_THAT(s[0]["normalization"].get<double>(), WithinAbs(0.5, 1e-12));
  CHECK(s[0]["k2"]["max_residual"].get<double>() < 1e-9);
  CHECK(s[0]["k1"]["max_residual"].get<double>() <= s[0]["tail_bound"].get<double>() * 2);

  const auto h = invoke({"ifs", "hutchinson", "--preset", "tent", "--iters", "12"});
  REQUIRE(h.code == 0);
  CHECK_THAT(h.json()["moments"]["x"].get<double>(), WithinAbs(0.5, 1e-9));

  const auto c = invoke({"ifs", "kms", "--preset", "tent", "--critical", "--iters", "8"});
  REQUIRE(c.code == 0);
  CHECK(c.json()["states"][0]["anchor"] == "hutchinson");
}

TEST_CASE("output files and atom CSVs", "[cli]") {
  const auto json_path = scratch("kms.json"), csv_path = scratch("atoms.csv");
  const auto o = invoke({"rat", "kms", "--map", "1/z^2", "--beta", "2", "--out", json_path.string(), "--atoms-out",
                         csv_path.string()});
  REQUIRE(o.code == 0);
  CHECK(o.out.empty());
  std::ifstream jf(json_path);
  const auto j = Json::parse(jf);
  REQUIRE(j["states"].size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string ref = j["states"][k]["atoms_ref"];
    CHECK(ref == cli::detail::atoms_path(csv_path.string(), k, 2));
    std::ifstream f(ref);
    std::string header, line;
    std::getline(f, header);
    CHECK(header == "re,im,is_inf,weight");
    int rows = 0;
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 2);
  }
}

TEST_CASE("atoms_path numbering", "[cli]") {
  CHECK(cli::detail::atoms_path("a.csv", 0, 1) == "a.csv");
  CHECK(cli::detail::atoms_path("a.csv", 1, 2) == "a_1.csv");
  CHECK(cli::detail::atoms_path("dir.v2/atoms", 0, 3) == "dir.v2/atoms_0");
}

TEST_CASE("identical input gives byte-identical output", "[cli]") {
  const std::vector<std::vector<std::string>> cases{
      {"rat", "kms", "--map", "z^2+1", "--beta", "1.5", "--depth", "8"},
      {"rat", "analyze", "--map", "(z^3-16/27)/z"},
      {"ifs", "hutchinson", "--preset", "sierpinski", "--mode", "chaos", "--samples", "20000", "--seed", "7"},
      {"ifs", "classify", "--preset", "sierpinski-twisted", "--beta-grid", "1:1.5:0.25", "--critical"},
  };
  for (const auto& args : cases) {
    const auto a = invoke(args), b = invoke(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
  }
  const auto s1 = invoke({"ifs", "hutchinson", "--preset", "sierpinski", "--mode", "chaos", "--samples", "20000",
                          "--seed", "7"});
  const auto s2 = invoke({"ifs", "hutchinson", "--preset", "sierpinski", "--mode", "chaos", "--samples", "20000",
                          "--seed", "8"});
  CHECK(s1.out != s2.out);
}

TEST_CASE("help goes to stdout and exits 0", "[cli]") {
  const auto o = invoke({"--help"});
  CHECK(o.code == 0);
  CHECK(o.out.find("rat") != std::string::npos);
  CHECK(o.err.empty());
}

TEST_CASE("every error path has its own exit code", "[cli]") {
  const auto bad_system = scratch("one_map.json");
  {
    std::ofstream f(bad_system);
    f << R"({"dim": 1, "maps": [{"linear": 0.5, "offset": 0}]})";
  }
  const std::vector<std::pair<ErrorKind, std::vector<std::string>>> cases{
      {ErrorKind::Usage, {"rat"}},
      {ErrorKind::Usage, {"rat", "kms", "--map", "z^2", "--beta", "1", "--critical"}},
      {ErrorKind::InvalidArgument, {"rat", "analyze", "--map", "z^2", "--tol", "-1"}},
      {ErrorKind::InvalidArgument, {"rat", "phase", "--map", "z^2", "--beta-grid", "1:0:0.1"}},
      {ErrorKind::SyntaxError, {"rat", "analyze", "--map", "z^^2"}},
      {ErrorKind::DegreeTooLow, {"rat", "analyze", "--map", "z+1"}},
      {ErrorKind::DivisionByZeroPolynomial, {"rat", "analyze", "--map", "1/(z-z)"}},
      {ErrorKind::ExceptionalSeed, {"rat", "lyubich", "--map", "z^2", "--seed", "0"}},
      {ErrorKind::OutOfRegime, {"rat", "kms", "--map", "z^2+1", "--beta", "0.5", "--point", "0"}},
      {ErrorKind::NotABranchPoint, {"ifs", "kms", "--preset", "tent", "--beta", "2", "--point", "0.3"}},
      {ErrorKind::WitnessNotFoundAtDepth,
       {"rat", "witness", "--map", "z^2", "--point", "1", "--beta", "0.5", "--atom-budget", "10"}},
      {ErrorKind::AtomBudgetExceeded, {"rat", "lyubich", "--map", "z^2+1", "--iters", "20", "--atom-budget", "100"}},
      {ErrorKind::InvalidSystem, {"ifs", "analyze", "--system", bad_system.string()}},
      {ErrorKind::Io, {"ifs", "analyze", "--system", scratch("missing.json").string()}},
  };
  std::map<ErrorKind, int> seen;
  for (const auto& [kind, args] : cases) {
    std::string line;
    for (const auto& a : args) line += a + " ";
    INFO(line);
    const auto o = invoke(args);
    CHECK(o.code == exit_code(kind));
    CHECK(o.out.empty());
    const auto e = o.error();
    CHECK(e["error"]["kind"] == std::string(to_string(kind)));
    CHECK(e["error"]["detail"].is_string());
    seen[kind] = o.code;
  }
  std::set<int> codes;
  for (const auto& [kind, code] : seen) codes.insert(code);
  CHECK(codes.size() == seen.size());
  CHECK(codes.count(0) == 0);
  CHECK(codes.count(1) == 0);
}

TEST_CASE("format_double and the dumper", "[report]") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(std::nan("")) == "null");
  CHECK(format_double(INFINITY) == "null");

  Json j{{"b", 1.5}, {"a", Json::array({1.0, 2.0})}, {"c", {{"z", "inf"}}}, {"d", Json::array()}};
  CHECK(to_json_string(j) == "{\n  \"a\": [1, 2],\n  \"b\": 1.5,\n  \"c\": {\n    \"z\": \"inf\"\n  },\n  \"d\": []\n}\n");
  // the output parses back to the same values
  CHECK(Json::parse(to_json_string(j)) == j);

  Json long_array = Json::array({1, 2, 3, 4, 5});
  CHECK(to_json_string(long_array) == "[\n  1,\n  2,\n  3,\n  4,\n  5\n]\n");
}

TEST_CASE("CSV atom dumps", "[report]") {
  std::ostringstream s;
  write_atoms_csv(s, SphereMeasure::from_atoms({{SpherePoint::infinity(), 0.25}, {from_affine({1.0, -2.0}), 0.75}}));
  const std::string text = s.str();
  CHECK(text.rfind("re,im,is_inf,weight\n", 0) == 0);
  CHECK(text.find("0,0,1,0.25\n") != std::string::npos);
  CHECK(text.find("1,-2,0,0.75\n") != std::string::npos);

  std::ostringstream p;
  write_atoms_csv(p, PlaneMeasure::from_atoms({{PlanePoint{0.5, 0.0}, 1.0}}));
  CHECK(p.str() == "x,y,weight\n0.5,0,1\n");
}
