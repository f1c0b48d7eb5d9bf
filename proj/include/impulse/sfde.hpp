#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "impulse/control.hpp"
#include "impulse/path.hpp"
#include "impulse/problem.hpp"

namespace impulse {

/// The random inputs of one path, drawn independently of the state so that
/// different controls can be run on identical Brownian and Poisson draws.
struct NoiseTape {
  int level = 0;
  std::size_t steps = 0;
  std::size_t dim = 1;
  std::vector<double> normals;             ///< steps * dim standard normals
  std::vector<std::vector<double>> jumps;  ///< jump marks z arriving in each step

  double normal(std::size_t step, std::size_t comp) const { return normals[step * dim + comp]; }
};

NoiseTape draw_noise(const ProblemSpec& problem, const DyadicGrid& grid, std::uint64_t seed,
                     std::uint64_t stream);
/// Aggregate a fine tape onto the coarser grid of the given level, keeping the
/// same Brownian and Poisson realization.
NoiseTape coarsen(const NoiseTape& tape, int level);

/// Decide an impulse at the view's node given the number already applied there
/// and overall; returning nullopt ends interventions at this node.
using FeedbackRule = std::function<std::optional<Mark>(const PathView& view, std::size_t applied)>;

class Simulator {
 public:
  Simulator(const ProblemSpec& problem, const DyadicGrid& grid);

  const ProblemSpec& problem() const noexcept { return *problem_; }
  const DyadicGrid& grid() const noexcept { return grid_; }

  CadlagPath simulate(const ImpulseControl& u, std::uint64_t seed, std::uint64_t stream = 0) const;
  CadlagPath simulate(const ImpulseControl& u, const NoiseTape& tape) const;
  CadlagPath simulate(const FeedbackRule& rule, const NoiseTape& tape) const;

  /// Γ(t, path, b) with the growth bound |Γ| <= K_Γ ∨ |y_t| enforced.
  State apply_impulse(const PathView& view, const Mark& b) const;

 private:
  void compensator(const PathView& view, std::span<double> out) const;

  const ProblemSpec* problem_;
  DyadicGrid grid_;
  std::vector<double> jump_sample_;
};

/// Free-function form of Simulator::apply_impulse.
State apply_impulse(const ProblemSpec& problem, const PathView& view, const Mark& b);

/// Snap every intervention time up to the next grid node.
ImpulseControl snap_to_grid(const ImpulseControl& u, const DyadicGrid& grid);

struct MomentEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t argmax = 0;  ///< index of the control attaining the maximum
  std::vector<double> per_control;
};

/// max over the controls of the Monte-Carlo estimate of E[sup_{[0,T]} |X^u|^p].
MomentEstimate moment_estimate(const ProblemSpec& problem, const std::vector<ImpulseControl>& controls,
                               const DyadicGrid& grid, int p, std::size_t n_paths, std::uint64_t seed,
                               unsigned workers = 1);

struct FlowRow {
  double dt = 0.0;
  double db = 0.0;
  double delta = 0.0;  ///< max(dt, db)
  double moment = 0.0;
  double stderr_ = 0.0;
};

struct FlowTable {
  double exponent = 4.0;  ///< 2(m+2)
  std::vector<FlowRow> rows;
  double slope = 0.0;  ///< least-squares slope of log moment on log delta
};

/// Paired runs of v∘(t,b)∘u and v∘(t+Δt, b+Δb)∘u on common noise; the distance
/// is measured on [t+Δt, T].
FlowTable flow_perturbation_test(const ProblemSpec& problem, const ImpulseControl& v,
                                 const ImpulseControl& u, double t, const Mark& b,
                                 const std::vector<std::pair<double, double>>& deltas,
                                 const DyadicGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                 unsigned workers = 1);

/// Least-squares slope of y on x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace impulse
