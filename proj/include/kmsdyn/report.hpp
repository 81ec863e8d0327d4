#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "kmsdyn/kms.hpp"
#include "kmsdyn/measure.hpp"
#include "kmsdyn/projective.hpp"

namespace kmsdyn {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// %.17g; non-finite values have no JSON spelling and become null.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void dump_string(std::ostream& os, const std::string& s) { os << Json(s).dump(); }

inline void dump(std::ostream& os, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  const std::string close(static_cast<std::size_t>(indent), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      // nlohmann's default object is a std::map, so keys come out sorted
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad;
        dump_string(os, it.key());
        os << ": ";
        dump(os, it.value(), indent + 2);
      }
      os << "\n" << close << "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // short arrays of scalars (points, pairs) stay on one line
      bool flat = j.size() <= 4;
      for (const auto& v : j) flat = flat && !v.is_structured();
      if (flat) {
        os << "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) os << ", ";
          dump(os, j[i], indent + 2);
        }
        os << "]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        dump(os, j[i], indent + 2);
      }
      os << "\n" << close << "]";
      return;
    }
    case Json::value_t::number_float:
      os << format_double(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

}  // namespace detail

/// Pretty JSON with sorted keys and doubles at 17 significant digits, so
/// equal inputs give byte-identical output.
inline void write_json(std::ostream& os, const Json& j) {
  detail::dump(os, j, 0);
  os << "\n";
}

inline std::string to_json_string(const Json& j) {
  std::ostringstream os;
  write_json(os, j);
  return os.str();
}

inline Json point_json(const SpherePoint& p) {
  if (p.is_infinity()) return "inf";
  const complex c = p.affine();
  return Json::array({c.real(), c.imag()});
}

inline Json point_json(const PlanePoint& p) { return Json::array({p.x, p.y}); }

template <class Point>
Json points_json(const std::vector<Point>& pts) {
  Json a = Json::array();
  for (const auto& p : pts) a.push_back(point_json(p));
  return a;
}

template <class Point>
Json measure_json(const AtomicMeasure<Point>& mu) {
  Json atoms = Json::array();
  for (const auto& a : mu.atoms()) atoms.push_back({{"point", point_json(a.point)}, {"weight", a.weight}});
  return {{"atoms", atoms}, {"total_mass", mu.total_mass()}};
}

inline Json trace_check_json(const TraceCheck& c, const TestFunctionLibrary& lib, bool k1) {
  Json j{{"max_residual", c.max_residual},
         {"worst_function", lib.name(c.worst_function)},
         {"atom_residual", c.atom_residual}};
  if (k1) {
    j["cutoff_mass"] = c.cutoff_mass;
    j["cutoff_radius"] = c.cutoff_radius;
  }
  return j;
}

// CSV atom dumps.

inline void write_atoms_csv(std::ostream& os, const SphereMeasure& mu) {
  os << "re,im,is_inf,weight\n";
  for (const auto& a : mu.atoms()) {
    if (a.point.is_infinity()) {
      os << "0,0,1," << format_double(a.weight) << "\n";
      continue;
    }
    const complex c = a.point.affine();
    os << format_double(c.real()) << "," << format_double(c.imag()) << ",0," << format_double(a.weight) << "\n";
  }
}

inline void write_atoms_csv(std::ostream& os, const PlaneMeasure& mu) {
  os << "x,y,weight\n";
  for (const auto& a : mu.atoms())
    os << format_double(a.point.x) << "," << format_double(a.point.y) << "," << format_double(a.weight) << "\n";
}

}  // namespace kmsdyn
