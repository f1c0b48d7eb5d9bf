#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "impulse/instance.hpp"
#include "impulse/path.hpp"
#include "impulse/problem.hpp"
#include "impulse/regression.hpp"
#include "impulse/reward.hpp"
#include "impulse/snell.hpp"
#include "json.hpp"

namespace impulse {

struct ConvergenceRow {
  std::size_t k = 0;
  double sup_increment = 0.0;
  double wall_time = 0.0;
};

struct SolverOptions {
  std::size_t k_max = 0;  ///< 0: take the instance's k_max, and if that is 0 too, the domination cap
  double tol = 1e-6;      ///< stop once the sup-increment is <= tol
  bool timing = false;    ///< record wall time in the convergence log (breaks byte-identical output)
  /// Interventions only at steps < cutoff (the truncated-horizon value ^T Y^k).
  std::size_t intervention_cutoff = std::numeric_limits<std::size_t>::max();
};

/// Exact Picard iterates Y^0..Y^K on a lattice; indices [k][t][x].
struct LatticeValues {
  std::vector<NodeArray> Y;
  std::vector<NodeArray> obstacle;      ///< max_b {-c + Y^{k-1}(t, Γ_b x)}; -inf where no impulse is allowed
  std::vector<NodeArray> continuation;  ///< reward of continuing one step then following Y^k
  std::vector<double> root;             ///< instance value per k
  std::vector<ConvergenceRow> log;
  std::size_t K = 0;
  std::size_t cap = 0;  ///< finite-intervention domination cap (0 when no cost floor)
  bool converged = false;
  NodeArray upper;      ///< per-node bound UB >= Y^k for every k
  NodeArray lower;      ///< per-node bound LB = Y^0 <= Y^k

  nlohmann::json to_json() const;
};

/// The domination cap ceil((UB - LB) / δ) + 1 maximized over nodes, where δ is
/// the smallest discounted cost available from the node on.
std::size_t intervention_cap(const FiniteInstance& inst, const NodeArray& Y0, const NodeArray& upper);

LatticeValues value_iteration(const FiniteInstance& inst, const SolverOptions& opt = {});

/// action[j][t][x] with j interventions left: -1 continue, else mark index.
struct LatticePolicy {
  std::vector<std::vector<std::vector<int>>> action;
  std::size_t K = 0;
  std::vector<Mark> marks;

  int act(std::size_t j, std::size_t t, std::size_t x) const;
  nlohmann::json to_json() const;
};

/// Intervene iff obstacle >= continuation; argmax ties go to the smallest mark.
LatticePolicy extract_policy(const FiniteInstance& inst, const LatticeValues& values);

/// Backward evaluation of a policy; optionally returns the table E[j][t][x].
double evaluate_policy_exact(const FiniteInstance& inst, const LatticePolicy& policy,
                             std::vector<NodeArray>* table = nullptr);

struct PolicyEvaluation {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n_paths = 0;
  std::vector<std::size_t> histogram;  ///< paths by number of interventions

  nlohmann::json to_json() const;
};

/// Forward Monte Carlo of the policy on the lattice chain.
PolicyEvaluation evaluate_policy(const FiniteInstance& inst, const LatticePolicy& policy, std::size_t n_paths,
                                 std::uint64_t seed, unsigned workers = 1);

// --- Lattice construction from a continuous problem ---------------------------

struct LatticeBuild {
  int level = 4;
  double horizon = 1.0;
  std::vector<double> points;  ///< explicit state points; else a uniform grid
  double x_min = 0.0, x_max = 1.0, dx = 0.01;
  double sd_cut = 12.0;        ///< Gaussian transitions kept within mean ± sd_cut sd
  std::size_t k_max = 0;
  std::size_t eta_samples = 100000;  ///< empirical η law when only a sampler is given
  std::uint64_t eta_seed = 7;
};

/// Discretize a scalar Markovian problem without jumps: Euler-Gaussian
/// transitions binned onto the state points, impulses snapped to the nearest point.
/// Random horizons use the η law on grid nodes; Observed mode augments the
/// states with "died here" copies and an absorbing "gone" state.
FiniteInstance build_lattice(const ProblemSpec& problem, const LatticeBuild& build);

/// Law of η on the nodes of the grid (index n+1 holds mass beyond the grid).
std::vector<double> eta_pmf(const HorizonSpec& h, const DyadicGrid& grid, std::size_t samples, std::uint64_t seed);

struct RandomHorizonResult {
  FiniteInstance instance;
  LatticeValues values;
  LatticePolicy policy;
  double value = 0.0;
};

/// Lattice pipeline for random-horizon problems; with observable η checks that
/// the policy never intervenes at or after η.
RandomHorizonResult solve_random_horizon(const ProblemSpec& problem, const LatticeBuild& build,
                                         const SolverOptions& opt = {});

/// Throws InternalConsistencyError if the policy acts in a died/gone state of
/// an Observed-mode lattice with `alive` live states per step.
void check_no_action_after_eta(const LatticePolicy& policy, const FiniteInstance& inst, std::size_t alive);

// --- Regression (least-squares Monte Carlo) backend ---------------------------

struct RegressionSetup {
  const ProblemSpec* problem = nullptr;
  int level = 3;
  double horizon = 1.0;
  std::vector<std::size_t> decision_nodes;  ///< empty: every node before the last
  FeatureSpec features;
  Basis basis{Basis::Kind::Polynomial, 3};
  std::size_t n_paths = 100000;
  std::uint64_t seed = 1;
  double ridge = 1e-8;
  unsigned workers = 1;
  std::size_t k_max = 4;
  double tol = 0.0;  ///< 0: one standard error of the root value
  std::size_t eta_samples = 100000;
  /// Share of training paths restarted after one random impulse; 0 trains on
  /// uncontrolled paths only.
  double restart_fraction = 0.5;
};

struct RegressionValues {
  std::vector<std::vector<SurfaceFit>> continuation;  ///< [k][t]
  std::vector<double> root, root_stderr;              ///< per k, in-sample
  std::vector<ConvergenceRow> log;
  std::vector<std::string> warnings;
  std::size_t K = 0;
  std::size_t cap = 0;
  bool converged = false;
  std::vector<char> decision;  ///< per node
  std::vector<double> eta_law; ///< hidden-η weights on nodes (empty otherwise)

  nlohmann::json to_json() const;
};

RegressionValues value_iteration_regression(const RegressionSetup& setup);

/// Feedback rule implied by fitted surfaces: with j interventions left at a
/// decision node, intervene iff max_b{-c + Ŷ^{j-1}} >= Ĉ^j.
class RegressionPolicy {
 public:
  RegressionPolicy(const RegressionSetup& setup, const RegressionValues& values);
  /// Ŷ^j at the view (arrival excluded).
  double value(const PathView& view, std::size_t j) const;
  double continuation(const PathView& view, std::size_t j) const;
  /// Best obstacle and its mark; -inf and an empty mark when none is allowed.
  std::pair<double, Mark> obstacle(const PathView& view, std::size_t j) const;
  std::optional<Mark> decide(const PathView& view, std::size_t j, std::size_t eta_node) const;
  std::size_t K() const noexcept { return values_->K; }

 private:
  using CacheKey = std::pair<std::pair<std::size_t, std::size_t>, State>;

  const RegressionSetup* setup_;
  const RegressionValues* values_;
  DyadicGrid grid_;
  bool cacheable_;
  mutable std::map<CacheKey, double> cache_;
};

PolicyEvaluation evaluate_policy(const RegressionSetup& setup, const RegressionValues& values,
                                 std::size_t n_paths, std::uint64_t seed);

// --- Horizon selection ----------------------------------------------------------

struct TailBound {
  double C = 1.0;
  double rate = 0.0;
};

struct HorizonChoice {
  double T = 0.0;
  double bound = 0.0;  ///< C e^{-rate T} at the chosen T
  TailBound tail;
};

/// Smallest multiple of `step` with C e^{-rate T} <= tol.
HorizonChoice choose_horizon(const TailBound& tail, double tol, double step);

}  // namespace impulse
