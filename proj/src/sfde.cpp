#include "impulse/sfde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "impulse/errors.hpp"
#include "impulse/parallel.hpp"

namespace impulse {

namespace {

constexpr std::size_t kCompensatorSample = 256;
constexpr std::uint64_t kCompensatorSeed = 0x636f6d70656e73ULL;
constexpr std::size_t kMaxImpulsesPerNode = 100000;

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

void check_finite(std::span<const double> x, std::size_t step, const char* stage) {
  if (!all_finite(x)) throw SimulationDiverged(step, std::string("non-finite state after ") + stage);
}

}  // namespace

NoiseTape draw_noise(const ProblemSpec& problem, const DyadicGrid& grid, std::uint64_t seed,
                     std::uint64_t stream) {
  NoiseTape tape;
  tape.level = grid.level();
  tape.steps = grid.last();
  tape.dim = problem.dim;
  tape.normals.resize(tape.steps * tape.dim);
  tape.jumps.resize(tape.steps);
  Rng rng(seed, stream);
  const double mass = problem.coef.jump_rate * grid.step();
  for (std::size_t i = 0; i < tape.steps; ++i) {
    for (std::size_t c = 0; c < tape.dim; ++c) tape.normals[i * tape.dim + c] = rng.normal();
    if (mass > 0.0) {
      const auto count = rng.poisson(mass);
      for (std::uint64_t j = 0; j < count; ++j) tape.jumps[i].push_back(problem.coef.jump_sampler(rng));
    }
  }
  return tape;
}

NoiseTape coarsen(const NoiseTape& tape, int level) {
  if (level > tape.level) throw InvalidInput("coarsen: target level finer than tape");
  const std::size_t r = std::size_t{1} << (tape.level - level);
  if (tape.steps % r != 0) throw InvalidInput("coarsen: step count not divisible");
  NoiseTape out;
  out.level = level;
  out.steps = tape.steps / r;
  out.dim = tape.dim;
  out.normals.assign(out.steps * out.dim, 0.0);
  out.jumps.resize(out.steps);
  const double scale = 1.0 / std::sqrt(static_cast<double>(r));
  for (std::size_t i = 0; i < tape.steps; ++i) {
    const std::size_t j = i / r;
    for (std::size_t c = 0; c < tape.dim; ++c) out.normals[j * out.dim + c] += tape.normal(i, c);
    out.jumps[j].insert(out.jumps[j].end(), tape.jumps[i].begin(), tape.jumps[i].end());
  }
  for (double& v : out.normals) v *= scale;
  return out;
}

Simulator::Simulator(const ProblemSpec& problem, const DyadicGrid& grid) : problem_(&problem), grid_(grid) {
  const auto& c = problem.coef;
  if (!problem.history) throw InvalidInput("problem has no initial history");
  if (c.jump_rate < 0.0) throw InvalidInput("jump rate must be nonnegative");
  if (c.jump_rate > 0.0) {
    if (!c.jump || !c.jump_sampler) throw InvalidInput("jump rate set without jump coefficient and sampler");
    if (!c.jump_mean) {
      Rng rng(kCompensatorSeed, 0);
      jump_sample_.reserve(kCompensatorSample);
      for (std::size_t i = 0; i < kCompensatorSample; ++i) jump_sample_.push_back(c.jump_sampler(rng));
    }
  }
}

void Simulator::compensator(const PathView& view, std::span<double> out) const {
  const auto& c = problem_->coef;
  std::fill(out.begin(), out.end(), 0.0);
  if (c.jump_rate <= 0.0) return;
  if (c.jump_mean) {
    c.jump_mean(view, out);
  } else {
    std::vector<double> g(out.size());
    for (double z : jump_sample_) {
      c.jump(view, z, g);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
    }
    for (double& o : out) o /= static_cast<double>(jump_sample_.size());
  }
  for (double& o : out) o *= c.jump_rate;
}

State Simulator::apply_impulse(const PathView& view, const Mark& b) const {
  return impulse::apply_impulse(*problem_, view, b);
}

State apply_impulse(const ProblemSpec& problem, const PathView& view, const Mark& b) {
  if (!problem.coef.impulse) throw InvalidInput("problem has no impulse map");
  if (!problem.marks.contains(b)) throw MarkDomainError("impulse mark outside U");
  State out(view.dim());
  problem.coef.impulse(view, b, out);
  const double bound = std::max(problem.growth.K_gamma, norm(view.current()));
  const double size = norm(out);
  if (!(size <= bound * (1.0 + 1e-12) + 1e-12))
    throw CoefficientContractError("impulse of size " + std::to_string(size) + " exceeds K_Gamma v |y_t| = " +
                                   std::to_string(bound) + " at t = " + std::to_string(view.time()));
  return out;
}

CadlagPath Simulator::simulate(const FeedbackRule& rule, const NoiseTape& tape) const {
  const auto& p = *problem_;
  const std::size_t d = p.dim;
  if (tape.level != grid_.level() || tape.steps != grid_.last() || tape.dim != d)
    throw InvalidInput("noise tape does not match the simulation grid");
  CadlagPath path(grid_, d, p.history);
  State x = p.history(0.0);
  if (x.size() != d) throw InvalidInput("initial state has the wrong dimension");
  check_finite(x, 0, "initial state");

  auto impulses_at = [&](std::size_t node, State& cur) {
    for (std::size_t applied = 0;; ++applied) {
      if (applied >= kMaxImpulsesPerNode) throw InternalConsistencyError("feedback rule never stops intervening");
      PathView view(path, node, cur);
      auto b = rule ? rule(view, applied) : std::nullopt;
      if (!b) return;
      State post = apply_impulse(view, *b);
      check_finite(post, node, "impulse");
      path.record_impulse({node, grid_.time(node), *b, cur, post});
      cur = std::move(post);
    }
  };

  State left = x;
  impulses_at(0, x);
  path.push_node(left, x, false);

  const double h = grid_.step();
  const double sqh = std::sqrt(h);
  State a(d), s(d), comp(d), g(d);
  for (std::size_t i = 0; i < tape.steps; ++i) {
    {
      PathView view(path, i, path.right(i));
      if (p.coef.drift) p.coef.drift(view, a); else std::fill(a.begin(), a.end(), 0.0);
      if (p.coef.diffusion) p.coef.diffusion(view, s); else std::fill(s.begin(), s.end(), 0.0);
      compensator(view, comp);
      auto xr = path.right(i);
      for (std::size_t c = 0; c < d; ++c) left[c] = xr[c] + a[c] * h + s[c] * sqh * tape.normal(i, c) - comp[c] * h;
    }
    check_finite(left, i + 1, "Euler step");
    x = left;
    const bool jumped = !tape.jumps[i].empty();
    for (double z : tape.jumps[i]) {
      PathView view(path, i + 1, x);
      p.coef.jump(view, z, g);
      for (std::size_t c = 0; c < d; ++c) x[c] += g[c];
    }
    check_finite(x, i + 1, "jump");
    impulses_at(i + 1, x);
    path.push_node(left, x, jumped);
  }
  return path;
}

ImpulseControl snap_to_grid(const ImpulseControl& u, const DyadicGrid& grid) {
  std::vector<Intervention> out;
  out.reserve(u.size());
  for (const auto& iv : u) out.push_back({grid.time(grid.ceil_node(iv.time)), iv.mark});
  return ImpulseControl(std::move(out));
}

CadlagPath Simulator::simulate(const ImpulseControl& u, const NoiseTape& tape) const {
  if (auto bad = validate(u, problem_->marks)) throw InvalidInput("invalid control: " + *bad);
  std::vector<std::size_t> nodes;
  nodes.reserve(u.size());
  for (const auto& iv : u) {
    auto n = grid_.node_of(iv.time);
    if (!n) throw InvalidInput("intervention time " + std::to_string(iv.time) + " is not a grid node");
    nodes.push_back(*n);
  }
  std::size_t next = 0;
  FeedbackRule rule = [&](const PathView& view, std::size_t) -> std::optional<Mark> {
    if (next < nodes.size() && nodes[next] == view.node()) return u[next++].mark;
    return std::nullopt;
  };
  return simulate(rule, tape);
}

CadlagPath Simulator::simulate(const ImpulseControl& u, std::uint64_t seed, std::uint64_t stream) const {
  return simulate(u, draw_noise(*problem_, grid_, seed, stream));
}

namespace {

std::pair<double, double> mean_and_stderr(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var = v.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

}  // namespace

MomentEstimate moment_estimate(const ProblemSpec& problem, const std::vector<ImpulseControl>& controls,
                               const DyadicGrid& grid, int p, std::size_t n_paths, std::uint64_t seed,
                               unsigned workers) {
  if (p <= 0 || p % 2 != 0) throw InvalidInput("moment order p must be a positive even integer");
  if (p > 2.0 * problem.growth.q + 1e-12) throw InvalidInput("moment order p exceeds 2q");
  if (n_paths == 0) throw InvalidInput("n_paths must be positive");
  const std::vector<ImpulseControl> family = controls.empty() ? std::vector<ImpulseControl>{ImpulseControl{}} : controls;
  Simulator sim(problem, grid);
  std::vector<std::vector<double>> vals(family.size(), std::vector<double>(n_paths));
  parallel_for(n_paths, workers, [&](std::size_t i) {
    const NoiseTape tape = draw_noise(problem, grid, seed, i);
    for (std::size_t c = 0; c < family.size(); ++c) {
      const CadlagPath path = sim.simulate(family[c], tape);
      vals[c][i] = std::pow(sup_norm(path, 0.0, std::min(grid.horizon(), grid.end())), p);
    }
  });
  MomentEstimate est;
  est.mean = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < family.size(); ++c) {
    auto [m, se] = mean_and_stderr(vals[c]);
    est.per_control.push_back(m);
    if (m > est.mean) {
      est.mean = m;
      est.stderr_ = se;
      est.argmax = c;
    }
  }
  return est;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

FlowTable flow_perturbation_test(const ProblemSpec& problem, const ImpulseControl& v,
                                 const ImpulseControl& u, double t, const Mark& b,
                                 const std::vector<std::pair<double, double>>& deltas,
                                 const DyadicGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                 unsigned workers) {
  if (n_paths == 0) throw InvalidInput("n_paths must be positive");
  for (const auto& [dt, db] : deltas)
    if (dt < 0.0 || db < 0.0) throw InvalidInput("perturbations must be nonnegative");
  FlowTable table;
  table.exponent = 2.0 * (problem.growth.m + 2.0);
  Simulator sim(problem, grid);
  const ImpulseControl base = compose(compose(v, ImpulseControl({{t, b}})), u);

  std::vector<std::vector<double>> dist(deltas.size(), std::vector<double>(n_paths));
  parallel_for(n_paths, workers, [&](std::size_t i) {
    const NoiseTape tape = draw_noise(problem, grid, seed, i);
    const CadlagPath p1 = sim.simulate(base, tape);
    for (std::size_t r = 0; r < deltas.size(); ++r) {
      const auto [dt, db] = deltas[r];
      Mark b2 = b;
      for (double& c : b2) c += db;
      const CadlagPath p2 = sim.simulate(compose(compose(v, ImpulseControl({{t + dt, b2}})), u), tape);
      const std::size_t first = grid.ceil_node(std::max(t + dt, v.last_time()));
      double m = 0.0;
      std::vector<double> diff(problem.dim);
      auto gap = [&](std::span<const double> a, std::span<const double> c) {
        for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = a[k] - c[k];
        return norm(diff);
      };
      for (std::size_t j = first; j < grid.size(); ++j) {
        m = std::max(m, gap(p1.right(j), p2.right(j)));
        if (j > first) m = std::max(m, gap(p1.left(j), p2.left(j)));
      }
      dist[r][i] = std::pow(m, table.exponent);
    }
  });

  std::vector<double> lx, ly;
  for (std::size_t r = 0; r < deltas.size(); ++r) {
    auto [mean, se] = mean_and_stderr(dist[r]);
    FlowRow row{deltas[r].first, deltas[r].second, std::max(deltas[r].first, deltas[r].second), mean, se};
    table.rows.push_back(row);
    if (row.delta > 0.0 && row.moment > 0.0) {
      lx.push_back(std::log(row.delta));
      ly.push_back(std::log(row.moment));
    }
  }
  table.slope = fit_slope(lx, ly);
  return table;
}

}  // namespace impulse
