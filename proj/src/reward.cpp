#include "impulse/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "impulse/errors.hpp"
#include "impulse/parallel.hpp"
#include "impulse/sfde.hpp"

namespace impulse {

double cost_piece_min(const ProblemSpec& problem, double t, std::span<const double> x, const Mark& b) {
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const auto& piece : problem.reward.costs) {
    if (!piece.domain.contains(b)) continue;
    found = true;
    best = std::min(best, piece.ell(t, x, b));
  }
  if (!found) throw MarkDomainError("mark lies in no cost piece");
  return best;
}

double cost_at(const ProblemSpec& problem, double s, std::span<const double> x, const Mark& b) {
  return problem.disc(s) * cost_piece_min(problem, s, x, b);
}

double cost(const ProblemSpec& problem, double t, const CadlagPath& path, const Mark& b,
            double last_intervention) {
  const double s = std::max(t, last_intervention);
  const State x = path.read(s, Side::Right);
  return cost_at(problem, s, x, b);
}

double running_integral(const ProblemSpec& problem, const CadlagPath& path, double T) {
  const auto& g = path.grid();
  if (T < 0.0) throw InvalidInput("running_integral: negative horizon");
  if (T > g.end() * (1.0 + 1e-12) + 1e-12) throw InvalidInput("running_integral: T beyond simulated horizon");
  if (!problem.reward.running) return 0.0;
  const double h = g.step();
  double acc = 0.0;
  for (std::size_t i = 0; i < path.filled(); ++i) {
    const double t = g.time(i);
    if (t >= T - 1e-12 * std::max(1.0, T)) break;
    const double w = std::min(h, T - t);
    acc += problem.disc(t) * problem.reward.running(t, path.right(i)) * w;
  }
  return acc;
}

namespace {

State state_before_impulses(const CadlagPath& path, double t) {
  if (auto node = path.grid().node_of(t)) {
    auto s = path.pre_impulse(*node);
    return State(s.begin(), s.end());
  }
  return path.read(t, Side::Right);
}

double total_cost(const ProblemSpec& problem, const CadlagPath& path, double up_to) {
  double c = 0.0;
  for (const auto& rec : path.impulses())
    if (rec.time <= up_to + 1e-12 * std::max(1.0, up_to)) c += cost_at(problem, rec.time, rec.pre, rec.mark);
  return c;
}

}  // namespace

double sample_reward(const ProblemSpec& problem, const ImpulseControl& u, const CadlagPath& path,
                     RewardMode mode, std::optional<double> eta, std::optional<double> T) {
  if (path.impulses().size() != u.size())
    throw InvalidInput("path impulse log does not match the control");
  const auto& g = path.grid();
  if (mode == RewardMode::Infinite) {
    const double horizon = T.value_or(std::min(g.horizon(), g.end()));
    double r = running_integral(problem, path, horizon) - total_cost(problem, path, horizon);
    if (problem.reward.terminal_at_horizon && problem.reward.terminal)
      r += problem.disc(horizon) * problem.reward.terminal(horizon, state_before_impulses(path, horizon));
    return r;
  }
  if (!eta) throw InvalidInput("random-horizon reward needs a sampled eta");
  const double e = *eta;
  if (e < 0.0) throw InvalidInput("eta must be nonnegative");
  if (e > g.end() * (1.0 + 1e-12) + 1e-12) throw InvalidInput("eta beyond simulated horizon");
  double r = running_integral(problem, path, e);
  // X^{[u]_{N(η-)}}_η: the same noise with the impulses at η removed, which is
  // the node's state after jumps and before its impulses.
  if (problem.reward.terminal) r += problem.disc(e) * problem.reward.terminal(e, state_before_impulses(path, e));
  for (const auto& rec : path.impulses()) r -= cost_at(problem, rec.time, rec.pre, rec.mark);
  return r;
}

State clamp_state(std::span<const double> x, double L) {
  const double n = norm(x);
  const double f = L / std::max(L, n);
  State out(x.begin(), x.end());
  if (std::isfinite(f))
    for (double& c : out) c *= f;
  return out;
}

double truncated_psi(const ProblemSpec& problem, const ImpulseControl& v, const ImpulseControl& u,
                     double t, const Mark& b, double T, double L, const CadlagPath& path) {
  if (!(T > 0.0) || !(L > 0.0)) throw InvalidInput("truncated_psi needs T, L > 0");
  const auto& log = path.impulses();
  if (log.size() != v.size() + 1 + u.size()) throw InvalidInput("path was not simulated under v∘(t,b)∘u");
  (void)t;
  (void)b;
  const auto& g = path.grid();
  const double horizon = std::min(T, g.end());
  double acc = 0.0;
  if (problem.reward.running) {
    const double h = g.step();
    for (std::size_t i = 0; i < path.filled(); ++i) {
      const double s = g.time(i);
      if (s >= horizon - 1e-12 * std::max(1.0, horizon)) break;
      acc += problem.disc(s) * problem.reward.running(s, clamp_state(path.right(i), L)) * std::min(h, horizon - s);
    }
  }
  for (std::size_t j = 0; j < u.size(); ++j) {
    const auto& rec = log[v.size() + 1 + j];
    if (rec.time >= T) continue;
    acc -= cost_at(problem, rec.time, clamp_state(rec.pre, L), rec.mark);
  }
  return acc;
}

TailFit fit_exponential(const std::vector<double>& T, const std::vector<double>& values) {
  TailFit fit;
  std::vector<double> x, y;
  bool all_zero = true;
  for (std::size_t i = 0; i < std::min(T.size(), values.size()); ++i) {
    if (values[i] != 0.0) all_zero = false;
    if (values[i] > 0.0) {
      x.push_back(T[i]);
      y.push_back(std::log(values[i]));
    }
  }
  if (all_zero) {
    fit.trivial = true;
    fit.decays = true;
    fit.rate = std::numeric_limits<double>::infinity();
    return fit;
  }
  const double slope = fit_slope(x, y);
  if (!std::isfinite(slope)) {
    fit.rate = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  fit.rate = -slope;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  fit.C = std::exp(my + fit.rate * mx);
  fit.decays = fit.rate > 0.0;
  return fit;
}

namespace {

nlohmann::json fit_json(const TailFit& f) {
  nlohmann::json j;
  j["trivial"] = f.trivial;
  j["decays"] = f.decays;
  j["rate"] = std::isfinite(f.rate) ? nlohmann::json(f.rate) : nlohmann::json(nullptr);
  j["C"] = f.C;
  return j;
}

ImpulseControl shift(const ImpulseControl& v, double T) {
  std::vector<Intervention> out;
  for (const auto& iv : v) out.push_back({iv.time + T, iv.mark});
  return ImpulseControl(std::move(out));
}

}  // namespace

nlohmann::json AdmissibilityReport::to_json() const {
  nlohmann::json j;
  j["reward_second_moment"] = reward_second_moment;
  j["cost_second_moment"] = cost_second_moment;
  j["cost_floor_ok"] = cost_floor_ok;
  j["flags"] = flags;
  j["epsilon"] = epsilon;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : tails) rows.push_back({{"T", r.T}, {"running_tail", r.running_tail}, {"push_tail", r.push_tail}});
  j["tails"] = rows;
  j["running_fit"] = fit_json(running_fit);
  j["push_fit"] = fit_json(push_fit);
  j["checks"] = {
      {"second_moments_finite", std::isfinite(reward_second_moment) && std::isfinite(cost_second_moment)},
      {"cost_floor", cost_floor_ok},
      {"running_tail_decays", running_fit.decays},
      {"push_tail_decays", push_fit.decays},
  };
  return j;
}

AdmissibilityReport admissibility_report(const ProblemSpec& problem, const AdmissibilityOptions& opt) {
  if (opt.n_paths == 0) throw InvalidInput("n_paths must be positive");
  if (opt.T_list.empty()) throw InvalidInput("T list must be nonempty");
  std::vector<ImpulseControl> family = opt.family;
  if (family.empty()) family.push_back(ImpulseControl{});
  double span = 0.0;
  for (const auto& u : family) span = std::max(span, u.last_time());
  const double max_T = *std::max_element(opt.T_list.begin(), opt.T_list.end());
  const DyadicGrid grid(opt.level, 2.0 * max_T + span + 1.0);
  for (auto& u : family) u = snap_to_grid(u, grid);

  AdmissibilityReport rep;
  rep.epsilon = problem.reward.epsilon;
  const double d0 = problem.delta(0.0);
  if (!(d0 > 0.0)) rep.cost_floor_ok = false;

  const std::size_t F = family.size(), nT = opt.T_list.size();
  Simulator sim(problem, grid);
  std::vector<std::vector<double>> reward(F, std::vector<double>(opt.n_paths));
  std::vector<std::vector<double>> costs(F, std::vector<double>(opt.n_paths));
  // window[f][k][i]: A_u(2T) - A_u(T) on path i; push[f][g][k][i]: squared change.
  std::vector<std::vector<std::vector<double>>> window(F, std::vector<std::vector<double>>(nT, std::vector<double>(opt.n_paths)));
  std::vector<std::vector<std::vector<std::vector<double>>>> push(
      F, std::vector<std::vector<std::vector<double>>>(F, std::vector<std::vector<double>>(nT, std::vector<double>(opt.n_paths))));
  std::vector<char> floor_bad(opt.n_paths, 0);

  parallel_for(opt.n_paths, opt.workers, [&](std::size_t i) {
    const NoiseTape tape = draw_noise(problem, grid, opt.seed, i);
    const double H = grid.end();
    auto check_floor = [&](const CadlagPath& p) {
      for (const auto& rec : p.impulses()) {
        const double l = cost_piece_min(problem, rec.time, rec.pre, rec.mark);
        if (!(problem.delta(rec.time) > 0.0) || l < problem.delta(rec.time)) floor_bad[i] = 1;
      }
    };
    auto costs_before = [&](const CadlagPath& p, double T) {
      double c = 0.0;
      for (const auto& rec : p.impulses())
        if (rec.time < T) c += cost_at(problem, rec.time, rec.pre, rec.mark);
      return c;
    };
    for (std::size_t f = 0; f < F; ++f) {
      const CadlagPath p = sim.simulate(family[f], tape);
      check_floor(p);
      const double R = sample_reward(problem, family[f], p, RewardMode::Infinite, std::nullopt, H);
      reward[f][i] = R;
      costs[f][i] = costs_before(p, H + 1.0);
      for (std::size_t k = 0; k < nT; ++k) {
        const double T = opt.T_list[k];
        const double a1 = running_integral(problem, p, T) - costs_before(p, T);
        const double a2 = running_integral(problem, p, 2.0 * T) - costs_before(p, 2.0 * T);
        window[f][k][i] = a2 - a1;
        for (std::size_t g2 = 0; g2 < F; ++g2) {
          if (family[g2].empty()) {
            push[f][g2][k][i] = 0.0;
            continue;
          }
          const ImpulseControl w = compose(family[f], snap_to_grid(shift(family[g2], T), grid));
          const CadlagPath q = sim.simulate(w, tape);
          check_floor(q);
          const double Rw = sample_reward(problem, w, q, RewardMode::Infinite, std::nullopt, H);
          push[f][g2][k][i] = (Rw - R) * (Rw - R);
        }
      }
    }
  });

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  for (std::size_t f = 0; f < F; ++f) {
    std::vector<double> sq(opt.n_paths), cq(opt.n_paths);
    for (std::size_t i = 0; i < opt.n_paths; ++i) {
      sq[i] = reward[f][i] * reward[f][i];
      cq[i] = costs[f][i] * costs[f][i];
    }
    rep.reward_second_moment = std::max(rep.reward_second_moment, mean(sq));
    rep.cost_second_moment = std::max(rep.cost_second_moment, mean(cq));
  }
  if (std::any_of(floor_bad.begin(), floor_bad.end(), [](char c) { return c != 0; })) rep.cost_floor_ok = false;

  std::vector<double> run_vals, push_vals;
  for (std::size_t k = 0; k < nT; ++k) {
    TailRow row;
    row.T = opt.T_list[k];
    for (std::size_t f = 0; f < F; ++f) {
      row.running_tail = std::max(row.running_tail, std::abs(mean(window[f][k])));
      for (std::size_t g2 = 0; g2 < F; ++g2) row.push_tail = std::max(row.push_tail, mean(push[f][g2][k]));
    }
    rep.tails.push_back(row);
    run_vals.push_back(row.running_tail);
    push_vals.push_back(row.push_tail);
  }
  rep.running_fit = fit_exponential(opt.T_list, run_vals);
  rep.push_fit = fit_exponential(opt.T_list, push_vals);
  if (!rep.cost_floor_ok) rep.flags.push_back("cost floor violated");
  if (!rep.running_fit.decays) rep.flags.push_back("running tail does not decay");
  if (!rep.push_fit.decays) rep.flags.push_back("push tail does not decay");
  return rep;
}

}  // namespace impulse
