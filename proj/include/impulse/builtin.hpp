#pragma once

#include <string>
#include <vector>

#include "impulse/problem.hpp"
#include "impulse/solver.hpp"

namespace impulse {

/// A named problem with the discretization it is usually solved on.
struct Builtin {
  ProblemSpec problem;
  LatticeBuild lattice;                 ///< exact-lattice backend settings
  std::vector<std::size_t> decisions;   ///< regression decision nodes (empty: all)
  std::string summary;
};

/// Built-in problems:
///   example        two-point random horizon with a non-attained supremum
///   gbm-reset      GBM with resets to {0.9, 1, 1.1}, 8 decision dates
///   ou-discounted  OU with resets to 0 and ρ(t) = t
///   gbm-flow       GBM a = 0.1x, σ = 0.2x with resets Γ = b (flow tests)
///   merton         GBM with lognormal compound Poisson jumps
///   zero           φ = ψ = 0 with positive costs
std::vector<std::string> builtin_names();
Builtin builtin(const std::string& name);

}  // namespace impulse
