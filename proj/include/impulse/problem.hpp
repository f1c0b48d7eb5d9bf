#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "impulse/control.hpp"
#include "impulse/path.hpp"
#include "impulse/rng.hpp"

namespace impulse {

/// Vector-valued coefficient of the path up to t, written into `out` (size dim).
using PathField = std::function<void(const PathView& view, std::span<double> out)>;
/// Jump coefficient γ(t, path before t, z).
using JumpField = std::function<void(const PathView& view, double z, std::span<double> out)>;
/// Impulse map Γ(t, path up to t, b).
using ImpulseField = std::function<void(const PathView& view, const Mark& b, std::span<double> out)>;

/// SFDE coefficients. The diffusion is diagonal: component i is driven by its
/// own Brownian motion with volatility out[i].
struct Coefficients {
  PathField drift;
  PathField diffusion;
  JumpField jump;
  ImpulseField impulse;
  /// Finite Lévy measure: total mass and a sampler of normalized jump marks z.
  double jump_rate = 0.0;
  std::function<double(Rng&)> jump_sampler;
  /// Optional exact E[γ(view, Z)]; otherwise estimated from a fixed sample.
  PathField jump_mean;
  /// γ̄(z), used only by the contract diagnostics.
  std::function<double(double)> jump_bound;
  /// Coefficients read only view.time() and view.current().
  bool markovian = true;
};

struct GrowthParams {
  double q = 2.0;  ///< polynomial growth order, q >= 2
  double m = 0.0;  ///< Lipschitz-moment exponent, m >= 0
  double lipschitz = 1.0;
  double K_gamma = std::numeric_limits<double>::infinity();
};

using ScalarField = std::function<double(double t, std::span<const double> x)>;
using CostField = std::function<double(double t, std::span<const double> x, const Mark& b)>;

/// One intervention-cost piece ℓ_i on the closed mark set U_i.
struct CostPiece {
  MarkSet domain;
  CostField ell;
};

struct RewardSpec {
  ScalarField running;                 ///< φ(t, x)
  std::vector<CostPiece> costs;        ///< ℓ = min over pieces containing b
  ScalarField terminal;                ///< ψ(t, x); random horizon or explicit terminal
  std::function<double(double)> discount;  ///< ρ(t)
  std::function<double(double)> floor;     ///< δ(t)
  double epsilon = 0.0;                ///< declared rate with ρ(t) >= εt
  bool terminal_at_horizon = false;    ///< infinite mode: add e^{-ρ(T)}ψ(T, X_T)
};

enum class HorizonMode { Infinite, RandomHorizon };

/// How the random horizon enters the information structure.
enum class EtaInformation {
  Hidden,    ///< η independent of the observed state and never observed
  Observed,  ///< η is seen when it happens
};

struct HorizonSpec {
  HorizonMode mode = HorizonMode::Infinite;
  double T = 1.0;  ///< truncation horizon of the simulation grid
  std::vector<std::pair<double, double>> eta_atoms;  ///< (time, probability)
  std::function<double(Rng&)> eta_sampler;
  EtaInformation information = EtaInformation::Hidden;
};

struct ProblemSpec {
  std::string name;
  std::size_t dim = 1;
  PreHistory history;
  Coefficients coef;
  GrowthParams growth;
  RewardSpec reward;
  MarkSet marks;
  HorizonSpec horizon;

  double rho(double t) const { return reward.discount ? reward.discount(t) : 0.0; }
  double disc(double t) const;
  double delta(double t) const { return reward.floor ? reward.floor(t) : 0.0; }
  State initial_state() const { return history(0.0); }
};

/// Draw one η from the atoms (if any) or the sampler.
double sample_eta(const HorizonSpec& h, Rng& rng);

// Convenience builders for scalar Markovian coefficients.
PathField scalar_field(std::function<double(double t, double x)> f);
JumpField scalar_jump(std::function<double(double t, double x, double z)> f);
ImpulseField scalar_impulse(std::function<double(double t, double x, double b)> f);
PathField zero_field();

}  // namespace impulse
