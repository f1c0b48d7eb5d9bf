#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "impulse/regression.hpp"
#include "json.hpp"

namespace impulse {

struct Transition {
  std::size_t to = 0;
  double prob = 0.0;
};

/// Values indexed [step][state].
using NodeArray = std::vector<std::vector<double>>;

enum class Information {
  Full,  ///< decisions may depend on the current state
  None,  ///< trivial filtration: decisions depend on the step only
};

/// Finite Markov chain on steps 0..n.
struct LatticeModel {
  std::vector<std::size_t> states;                         ///< state count per step
  std::vector<std::vector<std::vector<Transition>>> kernel;  ///< [t][x] -> row, t < n
  std::vector<double> initial;                             ///< distribution at step 0
  Information information = Information::Full;

  std::size_t steps() const noexcept { return states.empty() ? 0 : states.size() - 1; }
  /// Throws InvalidInput on ragged tables, bad indices or rows not summing to 1.
  void check() const;
  NodeArray zeros() const;
  /// Σ_y P(t, x, y) f(t+1, y).
  double expect(const NodeArray& f, std::size_t t, std::size_t x) const;
  /// Marginal state distributions under the initial law.
  NodeArray marginals() const;
};

enum class EnvelopeMode { Exact, Regression };

struct EnvelopeEstimate {
  EnvelopeMode mode = EnvelopeMode::Exact;
  NodeArray payoff;        ///< X; -inf marks a node where stopping is not allowed
  NodeArray running;       ///< r collected when continuing from (t, x); empty means zero
  NodeArray value;         ///< Z (exact) or realized values per path (regression)
  NodeArray continuation;  ///< r + E[Z_{t+1} | ·]; unused at the terminal step
  std::vector<std::vector<char>> stop;  ///< stopping region, ties stop

  // Regression mode.
  std::vector<SurfaceFit> fits;  ///< continuation fit per step t < n
  double root_value = 0.0;
  double root_stderr = 0.0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Z_n = X_n and Z_t = max(X_t, r_t + E[Z_{t+1}]). With Information::None the
/// recursion runs on marginal expectations and every state at a step shares
/// one decision.
EnvelopeEstimate snell_backward(const LatticeModel& lattice, const NodeArray& payoff,
                                const NodeArray* running = nullptr);

struct StoppingResult {
  std::vector<std::vector<char>> stop;
  std::vector<double> attained;  ///< E[Σ r + X_τ*] from each state at step 0
  double attained_initial = 0.0; ///< the same under the initial distribution
};

/// τ* = first node with Z = X, evaluated forward on the lattice.
StoppingResult optimal_stop(const LatticeModel& lattice, const EnvelopeEstimate& env);

struct DoobMeyer {
  NodeArray dK;            ///< [t][x], t < n: Z_t - (r_t + E[Z_{t+1}]) >= 0
  NodeArray martingale_drift;  ///< E[M_{t+1} - M_t | x], zero up to rounding
};

DoobMeyer doob_meyer(const LatticeModel& lattice, const EnvelopeEstimate& env);

/// Simulated data for least-squares Monte Carlo: features[t] is paths x f.
struct RegressionData {
  std::vector<Eigen::MatrixXd> features;
  NodeArray payoff;   ///< [t][path]; -inf = not stoppable
  NodeArray running;  ///< [t][path], may be empty
};

/// Longstaff-Schwartz backward recursion with per-step fits; stopping on
/// payoff >= fitted continuation.
EnvelopeEstimate snell_regression(const RegressionData& data, const Basis& basis, double ridge = 1e-8);

}  // namespace impulse
