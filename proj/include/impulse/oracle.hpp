#pragma once

#include <cstddef>
#include <vector>

#include "impulse/instance.hpp"

namespace impulse {

/// Exhaustive DP tables, all indexed [j][t][x] with j interventions left.
struct OracleTable {
  std::vector<NodeArray> V;
  std::vector<std::vector<std::vector<int>>> action;  ///< -1 continue, else mark index
  std::vector<double> root;                           ///< instance value per j

  double value(std::size_t j, std::size_t t, std::size_t x) const { return V.at(j).at(t).at(x); }
};

/// Largest number of (t, x, j) nodes brute_force_value accepts.
inline constexpr std::size_t kOracleNodeCap = 20'000'000;

/// V(t, x, j) = max(continue, max_b {-c(t, x, b) + V(t, Γ_b(t, x), j - 1)}),
/// by memoized recursion written directly on the instance tables. Intervene
/// iff the best impulse is >= continuing; ties between marks go to the
/// smallest. Throws CapExceeded above kOracleNodeCap nodes.
OracleTable brute_force_value(const FiniteInstance& inst, std::size_t k);
inline OracleTable brute_force_value(const FiniteInstance& inst) { return brute_force_value(inst, inst.k_max); }

/// A feedback decision table restricted to the nodes it actually reaches;
/// entries are (t, x, j, mark index).
struct Decision {
  std::size_t t = 0, x = 0, j = 0;
  int mark = -1;

  friend bool operator==(const Decision&, const Decision&) = default;
  friend auto operator<=>(const Decision&, const Decision&) = default;
};
using ControlTable = std::vector<Decision>;

struct EnumerationResult {
  double value = 0.0;
  std::vector<ControlTable> optimal;  ///< distinct optimal controls, each sorted
  std::size_t enumerated = 0;
};

/// Largest number of candidate controls enumerate_controls_value accepts.
inline constexpr std::size_t kEnumerationCap = 2'000'000;

/// Direct search over every feedback control on (t, x, interventions left)
/// using at most k <= 2 interventions, each evaluated forward from the
/// initial law. Throws CapExceeded when there are too many candidates.
EnumerationResult enumerate_controls_value(const FiniteInstance& inst, std::size_t k);

/// Closed-form reward of intervening once at τ in the two-point random-horizon
/// Example (η ∈ {1, 2} equally likely, ψ(t, x) = x e^{|t-1|}, cost e^{|t-1|}).
double example_value(double tau);
/// Reward of never intervening in the Example.
inline constexpr double kExampleNoAction = 0.0;
/// sup_τ example_value(τ) = 0.5 (e - 1), approached as τ ↑ 1 and never attained.
double example_supremum();
/// The best value on the dyadic grid of level l: 0.5 (1 + e) - e^{2^{-l}}.
double example_grid_value(int level);

}  // namespace impulse
