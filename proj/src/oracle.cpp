#include "impulse/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <string>

#include "impulse/errors.hpp"

namespace impulse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Everything below reads the raw instance tables; nothing here goes through
// the lattice or Snell code so the oracle stays an independent computation.

double cost_of(const FiniteInstance& inst, std::size_t b, std::size_t t, std::size_t x) {
  if (!inst.intervention_allowed[t]) return kInf;
  const double c = inst.cost[b][t][x];
  return std::isfinite(c) ? inst.discount[t] * c : kInf;
}

double continue_value(const FiniteInstance& inst, std::size_t t, std::size_t x,
                      const std::function<double(std::size_t)>& next) {
  if (t == inst.steps()) return 0.0;
  double acc = inst.discount[t] * inst.running[t][x];
  for (const auto& tr : inst.lattice.kernel[t][x])
    acc += tr.prob * (inst.discount[t + 1] * inst.arrival[t + 1][tr.to] + next(tr.to));
  return acc;
}

double root_value(const FiniteInstance& inst, const std::function<double(std::size_t)>& at0) {
  double v = 0.0;
  for (std::size_t x = 0; x < inst.lattice.initial.size(); ++x) {
    const double p = inst.lattice.initial[x];
    if (p > 0.0) v += p * (inst.discount[0] * inst.arrival[0][x] + at0(x));
  }
  return v;
}

std::size_t count_nodes(const FiniteInstance& inst, std::size_t k) {
  std::size_t s = 0;
  for (std::size_t t = 0; t <= inst.steps(); ++t) s += inst.lattice.states[t];
  return s * (k + 1);
}

}  // namespace

OracleTable brute_force_value(const FiniteInstance& inst, std::size_t k) {
  inst.check();
  const std::size_t nodes = count_nodes(inst, k);
  if (nodes > kOracleNodeCap)
    throw CapExceeded("oracle node count " + std::to_string(nodes) + " exceeds " + std::to_string(kOracleNodeCap));
  const std::size_t n = inst.steps();
  OracleTable out;
  out.V.resize(k + 1);
  out.action.resize(k + 1);
  std::vector<std::vector<std::vector<char>>> done(k + 1);
  for (std::size_t j = 0; j <= k; ++j) {
    out.V[j].resize(n + 1);
    out.action[j].resize(n + 1);
    done[j].resize(n + 1);
    for (std::size_t t = 0; t <= n; ++t) {
      out.V[j][t].assign(inst.lattice.states[t], 0.0);
      out.action[j][t].assign(inst.lattice.states[t], -1);
      done[j][t].assign(inst.lattice.states[t], 0);
    }
  }

  std::function<double(std::size_t, std::size_t, std::size_t)> V = [&](std::size_t t, std::size_t x,
                                                                         std::size_t j) -> double {
    if (done[j][t][x]) return out.V[j][t][x];
    const double cont = continue_value(inst, t, x, [&](std::size_t y) { return V(t + 1, y, j); });
    double best = -kInf;
    int arg = -1;
    if (j > 0) {
      for (std::size_t b = 0; b < inst.marks.size(); ++b) {
        const double c = cost_of(inst, b, t, x);
        if (!std::isfinite(c)) continue;
        const double v = -c + V(t, inst.impulse[b][t][x], j - 1);
        if (v > best) {
          best = v;
          arg = static_cast<int>(b);
        }
      }
    }
    const bool act = arg >= 0 && best >= cont;
    out.V[j][t][x] = act ? best : cont;
    out.action[j][t][x] = act ? arg : -1;
    done[j][t][x] = 1;
    return out.V[j][t][x];
  };

  // Fill from the terminal step backwards to keep the recursion shallow.
  for (std::size_t t = n + 1; t-- > 0;)
    for (std::size_t j = 0; j <= k; ++j)
      for (std::size_t x = 0; x < inst.lattice.states[t]; ++x) V(t, x, j);
  for (std::size_t j = 0; j <= k; ++j)
    out.root.push_back(root_value(inst, [&](std::size_t x) { return out.V[j][0][x]; }));
  return out;
}

EnumerationResult enumerate_controls_value(const FiniteInstance& inst, std::size_t k) {
  inst.check();
  if (k > 2) throw InvalidInput("enumeration supports at most 2 interventions");
  const std::size_t n = inst.steps(), m = inst.marks.size();

  struct Node {
    std::size_t t, x, j;
    std::vector<int> choices;  // -1 and every available mark
  };
  std::vector<Node> nodes;
  std::vector<std::vector<std::vector<std::size_t>>> index(k + 1);
  double count = 1.0;
  for (std::size_t j = 0; j <= k; ++j) {
    index[j].resize(n + 1);
    for (std::size_t t = 0; t <= n; ++t) {
      index[j][t].assign(inst.lattice.states[t], SIZE_MAX);
      if (j == 0) continue;
      for (std::size_t x = 0; x < inst.lattice.states[t]; ++x) {
        Node nd{t, x, j, {-1}};
        for (std::size_t b = 0; b < m; ++b)
          if (std::isfinite(cost_of(inst, b, t, x))) nd.choices.push_back(static_cast<int>(b));
        if (nd.choices.size() == 1) continue;
        count *= static_cast<double>(nd.choices.size());
        if (count > static_cast<double>(kEnumerationCap))
          throw CapExceeded("more than " + std::to_string(kEnumerationCap) + " candidate controls");
        index[j][t][x] = nodes.size();
        nodes.push_back(std::move(nd));
      }
    }
  }

  std::vector<std::size_t> pick(nodes.size(), 0);
  auto action = [&](std::size_t j, std::size_t t, std::size_t x) {
    const std::size_t i = index[j][t][x];
    return i == SIZE_MAX ? -1 : nodes[i].choices[pick[i]];
  };

  std::vector<NodeArray> E(k + 1);
  for (auto& e : E) {
    e.resize(n + 1);
    for (std::size_t t = 0; t <= n; ++t) e[t].assign(inst.lattice.states[t], 0.0);
  }
  auto evaluate = [&] {
    for (std::size_t t = n + 1; t-- > 0;)
      for (std::size_t j = 0; j <= k; ++j)
        for (std::size_t x = 0; x < inst.lattice.states[t]; ++x) {
          const int a = action(j, t, x);
          if (a >= 0) {
            const auto b = static_cast<std::size_t>(a);
            E[j][t][x] = -cost_of(inst, b, t, x) + E[j - 1][t][inst.impulse[b][t][x]];
          } else {
            E[j][t][x] = continue_value(inst, t, x, [&](std::size_t y) { return E[j][t + 1][y]; });
          }
        }
    return root_value(inst, [&](std::size_t x) { return E[k][0][x]; });
  };

  auto reached_interventions = [&] {
    std::set<Decision> seen;
    std::vector<std::vector<std::vector<char>>> vis(k + 1);
    for (std::size_t j = 0; j <= k; ++j) {
      vis[j].resize(n + 1);
      for (std::size_t t = 0; t <= n; ++t) vis[j][t].assign(inst.lattice.states[t], 0);
    }
    std::function<void(std::size_t, std::size_t, std::size_t)> walk = [&](std::size_t t, std::size_t x, std::size_t j) {
      if (vis[j][t][x]) return;
      vis[j][t][x] = 1;
      const int a = action(j, t, x);
      if (a >= 0) {
        seen.insert({t, x, j, a});
        walk(t, inst.impulse[static_cast<std::size_t>(a)][t][x], j - 1);
        return;
      }
      if (t == n) return;
      for (const auto& tr : inst.lattice.kernel[t][x])
        if (tr.prob > 0.0) walk(t + 1, tr.to, j);
    };
    for (std::size_t x = 0; x < inst.lattice.initial.size(); ++x)
      if (inst.lattice.initial[x] > 0.0) walk(0, x, k);
    return ControlTable(seen.begin(), seen.end());
  };

  EnumerationResult res;
  res.value = -kInf;
  std::set<ControlTable> best;
  for (;;) {
    const double v = evaluate();
    ++res.enumerated;
    if (v > res.value) {
      res.value = v;
      best.clear();
    }
    if (v == res.value) best.insert(reached_interventions());
    std::size_t i = 0;
    for (; i < pick.size(); ++i) {
      if (++pick[i] < nodes[i].choices.size()) break;
      pick[i] = 0;
    }
    if (i == pick.size()) break;
  }
  res.optimal.assign(best.begin(), best.end());
  return res;
}

double example_value(double tau) {
  if (tau < 0.0) throw InvalidInput("intervention time must be nonnegative");
  const double e = std::exp(1.0);
  if (tau < 1.0) return 0.5 * (1.0 + e) - std::exp(1.0 - tau);
  if (tau == 1.0) return 0.5 * e - 1.0;
  if (tau < 2.0) return 0.5 * e - std::exp(tau - 1.0);
  return -std::exp(tau - 1.0);
}

double example_supremum() { return 0.5 * (std::exp(1.0) - 1.0); }

double example_grid_value(int level) {
  return 0.5 * (1.0 + std::exp(1.0)) - std::exp(std::ldexp(1.0, -level));
}

}  // namespace impulse
