#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "impulse/errors.hpp"
#include "impulse/reward.hpp"
#include "impulse/rng.hpp"
#include "impulse/sfde.hpp"
#include "impulse/solver.hpp"

namespace impulse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::size_t nearest(const std::vector<double>& pts, double v) {
  auto it = std::lower_bound(pts.begin(), pts.end(), v);
  if (it == pts.begin()) return 0;
  if (it == pts.end()) return pts.size() - 1;
  const auto hi = static_cast<std::size_t>(it - pts.begin());
  return (v - pts[hi - 1] <= pts[hi] - v) ? hi - 1 : hi;
}

std::vector<Transition> gaussian_row(const std::vector<double>& pts, double m, double sd, double cut) {
  if (!(sd > 0.0)) return {{nearest(pts, m), 1.0}};
  const std::size_t lo = nearest(pts, m - cut * sd), hi = nearest(pts, m + cut * sd);
  std::vector<Transition> row;
  double prev = 0.0;
  for (std::size_t j = lo; j <= hi; ++j) {
    const double c = j == hi ? 1.0 : normal_cdf(((pts[j] + pts[j + 1]) / 2.0 - m) / sd);
    const double p = c - prev;
    if (p > 0.0) row.push_back({j, p});
    prev = std::max(prev, c);
  }
  if (row.empty()) row.push_back({nearest(pts, m), 1.0});
  return row;
}

std::vector<double> state_points(const LatticeBuild& b) {
  std::vector<double> pts = b.points;
  if (pts.empty()) {
    if (!(b.dx > 0.0) || !(b.x_max > b.x_min)) throw InvalidInput("lattice needs dx > 0 and x_max > x_min");
    const auto m = static_cast<std::size_t>(std::llround((b.x_max - b.x_min) / b.dx));
    for (std::size_t j = 0; j <= m; ++j) pts.push_back(b.x_min + static_cast<double>(j) * b.dx);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

}  // namespace

std::vector<double> eta_pmf(const HorizonSpec& h, const DyadicGrid& grid, std::size_t samples, std::uint64_t seed) {
  const std::size_t n = grid.last();
  std::vector<double> pmf(n + 2, 0.0);
  auto slot = [&](double t) {
    if (t > grid.end() * (1.0 + 1e-12) + 1e-12) return n + 1;
    return grid.ceil_node(t);
  };
  if (!h.eta_atoms.empty()) {
    double total = 0.0;
    for (const auto& [t, p] : h.eta_atoms) {
      if (!(p >= 0.0) || t < 0.0) throw InvalidInput("eta atoms need nonnegative times and probabilities");
      pmf[slot(t)] += p;
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("eta atom probabilities must sum to 1");
    return pmf;
  }
  if (!h.eta_sampler) throw InvalidInput("random horizon needs eta atoms or an eta sampler");
  if (samples == 0) throw InvalidInput("eta_samples must be positive");
  Rng rng(seed, 0xe7a);
  for (std::size_t i = 0; i < samples; ++i) pmf[slot(h.eta_sampler(rng))] += 1.0;
  for (double& p : pmf) p /= static_cast<double>(samples);
  return pmf;
}

FiniteInstance build_lattice(const ProblemSpec& problem, const LatticeBuild& build) {
  if (problem.dim != 1) throw InvalidInput("lattice construction supports scalar states only");
  if (problem.coef.jump_rate > 0.0) throw InvalidInput("lattice construction does not support jumps");
  if (!problem.coef.markovian) throw InvalidInput("lattice construction needs Markovian coefficients");
  const DyadicGrid grid(build.level, build.horizon);
  const std::size_t n = grid.last();
  const double h = grid.step();
  const std::vector<double> pts = state_points(build);
  const std::size_t M = pts.size();
  const bool random = problem.horizon.mode == HorizonMode::RandomHorizon;
  const bool observed = random && problem.horizon.information == EtaInformation::Observed;
  const std::size_t S = observed ? 2 * M + 1 : M;

  FiniteInstance inst;
  inst.name = problem.name.empty() ? "lattice" : problem.name;
  inst.lattice.states.assign(n + 1, S);
  inst.times.resize(n + 1);
  inst.discount.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    inst.times[i] = grid.time(i);
    inst.discount[i] = problem.disc(grid.time(i));
  }

  CadlagPath scratch(grid, 1, problem.history);
  auto view_at = [&](std::size_t i, const double& x) { return PathView(scratch, i, std::span<const double>(&x, 1)); };

  // Base chain on the M points.
  std::vector<std::vector<std::vector<Transition>>> base(n);
  double a = 0.0, s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    base[i].resize(M);
    for (std::size_t x = 0; x < M; ++x) {
      const PathView v = view_at(i, pts[x]);
      a = 0.0;
      s = 0.0;
      if (problem.coef.drift) problem.coef.drift(v, std::span<double>(&a, 1));
      if (problem.coef.diffusion) problem.coef.diffusion(v, std::span<double>(&s, 1));
      base[i][x] = gaussian_row(pts, pts[x] + a * h, std::abs(s) * std::sqrt(h), build.sd_cut);
    }
  }

  std::vector<double> pmf;
  if (random) pmf = eta_pmf(problem.horizon, grid, build.eta_samples, build.eta_seed);
  std::vector<double> survive(n + 1, 1.0);  // P(η > t_i)
  if (random) {
    double acc = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      acc += pmf[i];
      survive[i] = std::max(0.0, 1.0 - acc);
    }
  }

  const State x0 = problem.initial_state();
  const std::size_t start = nearest(pts, x0.at(0));
  inst.lattice.initial.assign(S, 0.0);
  inst.lattice.kernel.resize(n);
  inst.running.assign(n, std::vector<double>(S, 0.0));
  inst.arrival.assign(n + 1, std::vector<double>(S, 0.0));
  auto phi = [&](std::size_t i, std::size_t x) {
    return problem.reward.running ? problem.reward.running(grid.time(i), std::span<const double>(&pts[x], 1)) : 0.0;
  };
  auto psi = [&](std::size_t i, std::size_t x) {
    return problem.reward.terminal ? problem.reward.terminal(grid.time(i), std::span<const double>(&pts[x], 1)) : 0.0;
  };

  if (!observed) {
    inst.lattice.initial[start] = 1.0;
    inst.lattice.kernel = base;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t x = 0; x < M; ++x) inst.running[i][x] = survive[i] * phi(i, x) * h;
    if (random) {
      for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t x = 0; x < M; ++x) inst.arrival[i][x] = pmf[i] * psi(i, x);
    } else if (problem.reward.terminal_at_horizon) {
      for (std::size_t x = 0; x < M; ++x) inst.arrival[n][x] = psi(n, x);
    }
  } else {
    // States: alive 0..M-1, died-at-this-step M..2M-1, gone 2M.
    const std::size_t gone = 2 * M;
    inst.lattice.initial[start] = 1.0 - pmf[0];
    inst.lattice.initial[M + start] += pmf[0];
    for (std::size_t i = 0; i < n; ++i) {
      const double q = survive[i] > 0.0 ? survive[i + 1] / survive[i] : 1.0;
      auto& K = inst.lattice.kernel[i];
      K.resize(S);
      for (std::size_t x = 0; x < M; ++x) {
        for (const auto& tr : base[i][x]) {
          if (q > 0.0) K[x].push_back({tr.to, tr.prob * q});
          if (q < 1.0) K[x].push_back({M + tr.to, tr.prob * (1.0 - q)});
        }
        K[M + x] = {{gone, 1.0}};
        inst.running[i][x] = phi(i, x) * h;
      }
      K[gone] = {{gone, 1.0}};
    }
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t x = 0; x < M; ++x) inst.arrival[i][M + x] = psi(i, x);
  }

  // Marks, costs and impulse targets.
  for (const auto& b : problem.marks.points()) inst.marks.push_back(b);
  const std::size_t B = inst.marks.size();
  inst.cost.assign(B, NodeArray(n + 1, std::vector<double>(S, kInf)));
  inst.impulse.assign(B, std::vector<std::vector<std::size_t>>(n + 1, std::vector<std::size_t>(S, 0)));
  double floor = kInf;
  for (std::size_t i = 0; i <= n; ++i) floor = std::min(floor, problem.delta(grid.time(i)));
  if (!std::isfinite(floor)) floor = 0.0;
  floor = std::max(floor, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t xs = 0; xs < S; ++xs) {
        if (observed && xs == 2 * M) {
          inst.impulse[b][i][xs] = xs;
          continue;
        }
        const std::size_t x = observed && xs >= M ? xs - M : xs;
        const std::size_t offset = xs - x;
        const PathView v = view_at(i, pts[x]);
        const State post = apply_impulse(problem, v, inst.marks[b]);
        inst.impulse[b][i][xs] = offset + nearest(pts, post[0]);
        double c = kInf;
        try {
          c = cost_piece_min(problem, grid.time(i), std::span<const double>(&pts[x], 1), inst.marks[b]);
        } catch (const MarkDomainError&) {
          c = kInf;
        }
        if (std::isfinite(c) && c < floor)
          throw CoefficientContractError("cost " + std::to_string(c) + " below the floor delta at t=" +
                                         std::to_string(grid.time(i)));
        inst.cost[b][i][xs] = c;
      }
  if (observed)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i <= n; ++i) inst.cost[b][i][2 * M] = inst.cost[b][i][0];

  inst.intervention_allowed.assign(n + 1, 1);
  inst.intervention_allowed[n] = 0;
  inst.k_max = build.k_max;
  inst.delta = floor;
  inst.check();
  return inst;
}

void check_no_action_after_eta(const LatticePolicy& policy, const FiniteInstance& inst, std::size_t alive) {
  for (std::size_t j = 1; j < policy.action.size(); ++j)
    for (std::size_t t = 0; t <= inst.steps(); ++t)
      for (std::size_t x = alive; x < inst.states(t); ++x)
        if (policy.action[j][t][x] >= 0)
          throw InternalConsistencyError("policy intervenes at or after the observed horizon (step " +
                                         std::to_string(t) + ", state " + std::to_string(x) + ")");
}

RandomHorizonResult solve_random_horizon(const ProblemSpec& problem, const LatticeBuild& build,
                                         const SolverOptions& opt) {
  if (problem.horizon.mode != HorizonMode::RandomHorizon) throw InvalidInput("problem has no random horizon");
  RandomHorizonResult res;
  res.instance = build_lattice(problem, build);
  res.values = value_iteration(res.instance, opt);
  res.policy = extract_policy(res.instance, res.values);
  if (problem.horizon.information == EtaInformation::Observed)
    check_no_action_after_eta(res.policy, res.instance, (res.instance.states(0) - 1) / 2);
  res.value = res.values.root.back();
  return res;
}

HorizonChoice choose_horizon(const TailBound& tail, double tol, double step) {
  if (!(tol > 0.0)) throw InvalidInput("horizon tolerance must be positive");
  if (!(step > 0.0)) throw InvalidInput("horizon step must be positive");
  if (!(tail.rate > 0.0) || !std::isfinite(tail.rate))
    throw HorizonSelectionError("no tail decay detected; set the horizon T manually");
  HorizonChoice out;
  out.tail = tail;
  double units = 1.0;
  if (tail.C > 0.0) {
    const double T = std::log(tail.C / tol) / tail.rate;
    const double scaled = T / step;
    units = std::max(1.0, std::ceil(scaled - 1e-9 * std::max(1.0, std::abs(scaled))));
  }
  out.T = units * step;
  out.bound = tail.C * std::exp(-tail.rate * out.T);
  return out;
}

}  // namespace impulse
