#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "impulse/errors.hpp"
#include "impulse/parallel.hpp"
#include "impulse/rng.hpp"
#include "impulse/solver.hpp"

namespace impulse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json node_json(const NodeArray& a) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& row : a) {
    nlohmann::json r = nlohmann::json::array();
    for (double v : row) r.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
    out.push_back(r);
  }
  return out;
}

/// Reward of continuing from (t, x) before the next node's value: the running
/// reward plus the discounted arrival reward at t+1.
NodeArray step_rewards(const FiniteInstance& inst) {
  const auto& lat = inst.lattice;
  NodeArray r(inst.steps());
  for (std::size_t t = 0; t < inst.steps(); ++t) {
    r[t].resize(inst.states(t));
    for (std::size_t x = 0; x < inst.states(t); ++x) {
      double a = 0.0;
      for (const auto& tr : lat.kernel[t][x]) a += tr.prob * inst.arrival[t + 1][tr.to];
      r[t][x] = inst.discount[t] * inst.running[t][x] + inst.discount[t + 1] * a;
    }
  }
  return r;
}

bool allowed_at(const FiniteInstance& inst, const SolverOptions& opt, std::size_t t) {
  return inst.intervention_allowed[t] && t < opt.intervention_cutoff;
}

double root_of(const FiniteInstance& inst, const NodeArray& Y) {
  double v = 0.0;
  for (std::size_t x = 0; x < inst.states(0); ++x) {
    const double p = inst.lattice.initial[x];
    if (p > 0.0) v += p * (inst.discount[0] * inst.arrival[0][x] + Y[0][x]);
  }
  return v;
}

}  // namespace

std::size_t intervention_cap(const FiniteInstance& inst, const NodeArray& Y0, const NodeArray& upper) {
  const std::size_t n = inst.steps();
  // Smallest discounted cost available at any step >= t.
  std::vector<double> floor_from(n + 2, kInf);
  for (std::size_t t = n + 1; t-- > 0;) {
    double m = kInf;
    if (t <= n)
      for (std::size_t b = 0; b < inst.mark_count(); ++b)
        for (std::size_t x = 0; x < inst.states(t); ++x) m = std::min(m, inst.discounted_cost(b, t, x));
    floor_from[t] = std::min(m, floor_from[t + 1]);
  }
  std::size_t cap = 0;
  for (std::size_t t = 0; t <= n; ++t) {
    const double d = floor_from[t];
    if (!std::isfinite(d)) continue;
    if (!(d > 0.0)) return 0;
    for (std::size_t x = 0; x < inst.states(t); ++x) {
      const double gap = std::max(0.0, upper[t][x] - Y0[t][x]);
      cap = std::max(cap, static_cast<std::size_t>(std::ceil(gap / d)) + 1);
    }
  }
  return std::max<std::size_t>(cap, 1);
}

LatticeValues value_iteration(const FiniteInstance& inst, const SolverOptions& opt) {
  inst.check();
  const auto& lat = inst.lattice;
  if (lat.information != Information::Full)
    throw InvalidInput("impulse value iteration needs a full-information lattice");
  const std::size_t n = inst.steps();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    if (!opt.timing) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const NodeArray r = step_rewards(inst);
  LatticeValues out;

  // Y^0: no interventions, so stopping is never allowed before the terminal step.
  NodeArray payoff = lat.zeros();
  for (std::size_t t = 0; t < n; ++t) payoff[t].assign(inst.states(t), -kInf);
  EnvelopeEstimate env = snell_backward(lat, payoff, &r);
  out.Y.push_back(env.value);
  out.obstacle.push_back(payoff);
  env.continuation[n].assign(inst.states(n), 0.0);
  out.continuation.push_back(env.continuation);
  out.root.push_back(root_of(inst, out.Y[0]));
  out.log.push_back({0, 0.0, elapsed()});

  out.upper = lat.zeros();
  {
    std::vector<double> ub(n + 1, 0.0);
    for (std::size_t t = n; t-- > 0;) {
      double run = -kInf, arr = -kInf;
      for (double v : inst.running[t]) run = std::max(run, v);
      for (double v : inst.arrival[t + 1]) arr = std::max(arr, v);
      ub[t] = inst.discount[t] * run + inst.discount[t + 1] * arr + ub[t + 1];
    }
    for (std::size_t t = 0; t <= n; ++t) out.upper[t].assign(inst.states(t), ub[t]);
  }
  out.lower = out.Y[0];
  out.cap = intervention_cap(inst, out.Y[0], out.upper);

  const std::size_t requested = opt.k_max ? opt.k_max : inst.k_max;
  if (requested == 0 && out.cap == 0)
    throw InvalidInput("k_max must be given when costs have no positive floor");
  std::size_t K = requested == 0 ? out.cap : (out.cap > 0 ? std::min(requested, out.cap) : requested);

  for (std::size_t k = 1; k <= K; ++k) {
    const NodeArray& prev = out.Y[k - 1];
    NodeArray O = lat.zeros();
    for (std::size_t t = 0; t <= n; ++t) {
      for (std::size_t x = 0; x < inst.states(t); ++x) {
        double best = -kInf;
        if (allowed_at(inst, opt, t)) {
          for (std::size_t b = 0; b < inst.mark_count(); ++b) {
            const double c = inst.discounted_cost(b, t, x);
            if (!std::isfinite(c)) continue;
            best = std::max(best, -c + prev[t][inst.impulse[b][t][x]]);
          }
        }
        O[t][x] = best;
      }
    }
    NodeArray X = O;
    for (double& v : X[n]) v = std::max(v, 0.0);
    env = snell_backward(lat, X, &r);
    env.continuation[n].assign(inst.states(n), 0.0);

    double inc = 0.0;
    for (std::size_t t = 0; t <= n; ++t)
      for (std::size_t x = 0; x < inst.states(t); ++x) {
        const double d = env.value[t][x] - prev[t][x];
        if (d < 0.0)
          throw InternalConsistencyError("Picard iterate decreased by " + std::to_string(-d) + " at k=" +
                                         std::to_string(k) + ", t=" + std::to_string(t) + ", x=" + std::to_string(x));
        inc = std::max(inc, d);
      }
    out.Y.push_back(std::move(env.value));
    out.obstacle.push_back(std::move(O));
    out.continuation.push_back(std::move(env.continuation));
    out.root.push_back(root_of(inst, out.Y.back()));
    out.log.push_back({k, inc, elapsed()});
    if (inc <= opt.tol) {
      out.converged = true;
      break;
    }
  }
  out.K = out.Y.size() - 1;
  if (!out.converged && out.cap > 0 && out.K >= out.cap) out.converged = true;
  return out;
}

nlohmann::json LatticeValues::to_json() const {
  nlohmann::json j;
  j["backend"] = "exact-lattice";
  j["K"] = K;
  j["cap"] = cap;
  j["converged"] = converged;
  j["root"] = root;
  nlohmann::json ys = nlohmann::json::array();
  for (const auto& y : Y) ys.push_back(node_json(y));
  j["Y"] = ys;
  j["upper"] = node_json(upper);
  return j;
}

int LatticePolicy::act(std::size_t j, std::size_t t, std::size_t x) const {
  if (j == 0) return -1;
  return action[std::min(j, K)][t][x];
}

nlohmann::json LatticePolicy::to_json() const {
  nlohmann::json j;
  j["K"] = K;
  nlohmann::json m = nlohmann::json::array();
  for (const auto& b : marks) m.push_back(mark_to_json(b));
  j["marks"] = m;
  j["action"] = action;
  return j;
}

LatticePolicy extract_policy(const FiniteInstance& inst, const LatticeValues& values) {
  const std::size_t n = inst.steps();
  LatticePolicy pol;
  pol.K = values.K;
  pol.marks = inst.marks;
  pol.action.resize(values.K + 1);
  for (std::size_t j = 0; j <= values.K; ++j) {
    pol.action[j].resize(n + 1);
    for (std::size_t t = 0; t <= n; ++t) {
      pol.action[j][t].assign(inst.states(t), -1);
      if (j == 0) continue;
      for (std::size_t x = 0; x < inst.states(t); ++x) {
        const double O = values.obstacle[j][t][x];
        const double C = values.continuation[j][t][x];
        if (!std::isfinite(O) || O < C) continue;
        int best = -1;
        double best_v = -kInf;
        for (std::size_t b = 0; b < inst.mark_count(); ++b) {
          const double c = inst.discounted_cost(b, t, x);
          if (!std::isfinite(c)) continue;
          const double v = -c + values.Y[j - 1][t][inst.impulse[b][t][x]];
          if (v > best_v) {
            best_v = v;
            best = static_cast<int>(b);
          }
        }
        pol.action[j][t][x] = best;
      }
    }
  }
  return pol;
}

double evaluate_policy_exact(const FiniteInstance& inst, const LatticePolicy& policy, std::vector<NodeArray>* table) {
  const auto& lat = inst.lattice;
  const std::size_t n = inst.steps(), K = policy.K;
  std::vector<NodeArray> E(K + 1, lat.zeros());
  for (std::size_t t = n + 1; t-- > 0;) {
    for (std::size_t j = 0; j <= K; ++j) {
      for (std::size_t x = 0; x < inst.states(t); ++x) {
        const int a = policy.act(j, t, x);
        if (a >= 0) {
          const auto b = static_cast<std::size_t>(a);
          const std::size_t y = inst.impulse[b][t][x];
          E[j][t][x] = -inst.discounted_cost(b, t, x) + E[j - 1][t][y];
          continue;
        }
        if (t == n) {
          E[j][t][x] = 0.0;
          continue;
        }
        double acc = inst.discount[t] * inst.running[t][x];
        for (const auto& tr : lat.kernel[t][x])
          acc += tr.prob * (inst.discount[t + 1] * inst.arrival[t + 1][tr.to] + E[j][t + 1][tr.to]);
        E[j][t][x] = acc;
      }
    }
  }
  const double v = root_of(inst, E[K]);
  if (table) *table = std::move(E);
  return v;
}

nlohmann::json PolicyEvaluation::to_json() const {
  return {{"mean", mean}, {"stderr", stderr_}, {"n_paths", n_paths}, {"histogram", histogram}};
}

PolicyEvaluation evaluate_policy(const FiniteInstance& inst, const LatticePolicy& policy, std::size_t n_paths,
                                 std::uint64_t seed, unsigned workers) {
  if (n_paths == 0) throw InvalidInput("n_paths must be positive");
  const auto& lat = inst.lattice;
  const std::size_t n = inst.steps();
  std::vector<double> reward(n_paths);
  std::vector<std::size_t> count(n_paths);
  auto draw = [](Rng& rng, const std::vector<Transition>& row) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& tr : row) {
      acc += tr.prob;
      if (u < acc) return tr.to;
    }
    return row.back().to;
  };
  parallel_for(n_paths, workers, [&](std::size_t i) {
    Rng rng(seed, i);
    std::vector<Transition> init;
    for (std::size_t x = 0; x < lat.initial.size(); ++x)
      if (lat.initial[x] > 0.0) init.push_back({x, lat.initial[x]});
    std::size_t x = draw(rng, init), j = policy.K, N = 0;
    double acc = 0.0;
    for (std::size_t t = 0; t <= n; ++t) {
      acc += inst.discount[t] * inst.arrival[t][x];
      for (int a; j > 0 && (a = policy.act(j, t, x)) >= 0;) {
        const auto b = static_cast<std::size_t>(a);
        acc -= inst.discounted_cost(b, t, x);
        x = inst.impulse[b][t][x];
        --j;
        ++N;
      }
      if (t < n) {
        acc += inst.discount[t] * inst.running[t][x];
        x = draw(rng, lat.kernel[t][x]);
      }
    }
    reward[i] = acc;
    count[i] = N;
  });
  PolicyEvaluation ev;
  ev.n_paths = n_paths;
  double mean = 0.0;
  for (double v : reward) mean += v;
  mean /= static_cast<double>(n_paths);
  double ss = 0.0;
  for (double v : reward) ss += (v - mean) * (v - mean);
  ev.mean = mean;
  ev.stderr_ = n_paths > 1 ? std::sqrt(ss / static_cast<double>(n_paths - 1) / static_cast<double>(n_paths)) : 0.0;
  ev.histogram.assign(policy.K + 1, 0);
  for (std::size_t c : count) ++ev.histogram[c];
  return ev;
}

}  // namespace impulse
