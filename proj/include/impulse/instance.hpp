#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "impulse/control.hpp"
#include "impulse/snell.hpp"
#include "json.hpp"

namespace impulse {

/// A finite impulse control problem on a lattice. At step t in state x the
/// controller first collects discount[t] * arrival[t][x], then may apply
/// impulses (each b costs discount[t] * cost[b][t][x] and moves the state to
/// impulse[b][t][x] at the same step), then collects discount[t] *
/// running[t][x] and the chain moves on.
///
/// Value tables Y(t, x) cover everything after the arrival reward at (t, x),
/// so the instance value is Σ_x initial[x] (discount[0] arrival[0][x] + Y(0, x)).
struct FiniteInstance {
  std::string name;
  LatticeModel lattice;
  std::vector<double> times;    ///< calendar time of each step (defaults to 0, 1, ...)
  NodeArray running;            ///< [t][x], t < n
  NodeArray arrival;            ///< [t][x], t <= n
  std::vector<double> discount; ///< [t], positive
  std::vector<NodeArray> cost;  ///< [b][t][x], +inf where b is not available
  std::vector<std::vector<std::vector<std::size_t>>> impulse;  ///< [b][t][x] -> state at t
  std::vector<char> intervention_allowed;  ///< [t]
  std::size_t k_max = 1;
  std::vector<Mark> marks;      ///< sorted by mark_less; index order is the tie-break order
  double delta = 0.0;           ///< declared cost floor

  std::size_t steps() const noexcept { return lattice.steps(); }
  std::size_t states(std::size_t t) const { return lattice.states.at(t); }
  std::size_t mark_count() const noexcept { return marks.size(); }
  /// discounted cost, +inf where unavailable or interventions are disallowed
  double discounted_cost(std::size_t b, std::size_t t, std::size_t x) const;
  std::size_t node_count() const;

  /// Throws InvalidInput naming the first malformed field.
  void check() const;
};

FiniteInstance instance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FiniteInstance& inst);
FiniteInstance load_instance(const std::string& path);
void save_instance(const FiniteInstance& inst, const std::string& path);

struct RandomInstanceSpec {
  std::size_t states = 5;
  std::size_t steps = 16;
  std::size_t marks = 3;
  std::size_t k_max = 3;
  double cost_low = 0.2;
  double cost_high = 1.0;
  double reward_scale = 1.0;
  double discount_rate = 0.05;
  bool deterministic = false;  ///< each row a single transition
  bool symmetric_marks = false;  ///< all marks share costs and targets
};

/// Random instance drawn from the library RNG with the given seed.
FiniteInstance random_instance(const RandomInstanceSpec& spec, std::uint64_t seed);

/// Randomized lattice with the given step and state counts (used by test suites).
LatticeModel random_lattice(std::size_t steps, std::size_t max_states, std::uint64_t seed);

}  // namespace impulse
