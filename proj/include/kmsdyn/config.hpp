#pragma once

#include <cstdlib>
#include <string>

namespace kmsdyn {

inline constexpr std::size_t kDefaultAtomBudget = 2'000'000;

/// Atom budget for orbit trees and pullbacks; KMSDYN_ATOM_BUDGET overrides.
inline std::size_t default_atom_budget() {
  if (const char* env = std::getenv("KMSDYN_ATOM_BUDGET")) {
    try {
      const long long v = std::stoll(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return kDefaultAtomBudget;
}

}  // namespace kmsdyn
