#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "impulse/control.hpp"
#include "impulse/path.hpp"
#include "impulse/problem.hpp"
#include "json.hpp"

namespace impulse {

/// Undiscounted ℓ(t, x, b) = min over the pieces whose domain contains b.
double cost_piece_min(const ProblemSpec& problem, double t, std::span<const double> x, const Mark& b);
/// Discounted cost e^{-ρ(s)} ℓ(s, x, b).
double cost_at(const ProblemSpec& problem, double s, std::span<const double> x, const Mark& b);
/// c(u∘(t,b)) = e^{-ρ(t∨τ_N)} ℓ(t∨τ_N, X_{t∨τ_N}, b), reading the path's right value.
double cost(const ProblemSpec& problem, double t, const CadlagPath& path, const Mark& b,
            double last_intervention);

/// Left-rule ∫_0^T e^{-ρ(t)} φ(t, X_t) dt on the path's grid.
double running_integral(const ProblemSpec& problem, const CadlagPath& path, double T);

enum class RewardMode { Infinite, RandomHorizon };

/// One realization of the reward. Infinite mode truncates at T (defaults to
/// the grid horizon). Random-horizon mode needs η: ψ is read from the state
/// before any impulse applied at η, while every intervention is charged.
double sample_reward(const ProblemSpec& problem, const ImpulseControl& u, const CadlagPath& path,
                     RewardMode mode, std::optional<double> eta = std::nullopt,
                     std::optional<double> T = std::nullopt);

/// Ψ^{v,u}_{T,L}(t,b) on a path simulated under v∘(t,b)∘u.
double truncated_psi(const ProblemSpec& problem, const ImpulseControl& v, const ImpulseControl& u,
                     double t, const Mark& b, double T, double L, const CadlagPath& path);

/// ^L x = L / (L ∨ |x|) · x.
State clamp_state(std::span<const double> x, double L);

struct TailRow {
  double T = 0.0;
  double running_tail = 0.0;  ///< sup_u |J_T(u) - J_{2T}(u)|
  double push_tail = 0.0;     ///< sup_u E|φ(u∘v_T) - φ(u)|^2
};

struct TailFit {
  double C = 0.0;
  double rate = 0.0;
  bool trivial = false;  ///< every measured tail is exactly zero
  bool decays = false;
};

TailFit fit_exponential(const std::vector<double>& T, const std::vector<double>& values);

struct AdmissibilityReport {
  double reward_second_moment = 0.0;  ///< sup_u E|φ(u)|^2
  double cost_second_moment = 0.0;    ///< sup_u E|c(u)|^2
  bool cost_floor_ok = true;
  std::vector<std::string> flags;
  std::vector<TailRow> tails;
  TailFit running_fit;
  TailFit push_fit;
  double epsilon = 0.0;

  nlohmann::json to_json() const;
};

struct AdmissibilityOptions {
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  int level = 4;
  std::vector<ImpulseControl> family;  ///< defaults to {∅}
  std::vector<double> T_list{2.0, 4.0, 8.0};
  unsigned workers = 1;
};

AdmissibilityReport admissibility_report(const ProblemSpec& problem, const AdmissibilityOptions& opt);

}  // namespace impulse
