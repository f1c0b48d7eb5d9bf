#pragma once

#include <cmath>
#include <initializer_list>
#include <utility>
#include <span>

#include "impulse/instance.hpp"
#include "impulse/problem.hpp"
#include "impulse/snell.hpp"

namespace fixtures {

using namespace impulse;

/// Scalar problem with zero dynamics started at x0, identity impulse and no rewards.
inline ProblemSpec still_problem(double x0 = 0.0, double T = 1.0) {
  ProblemSpec p;
  p.name = "still";
  p.history = constant_history({x0});
  p.coef.drift = zero_field();
  p.coef.diffusion = zero_field();
  p.coef.impulse = scalar_impulse([](double, double x, double) { return x; });
  p.marks = MarkSet::finite({{0.0}});
  p.reward.running = [](double, std::span<const double>) { return 0.0; };
  p.reward.costs = {{p.marks, [](double, std::span<const double>, const Mark&) { return 1.0; }}};
  p.reward.floor = [](double) { return 1.0; };
  p.horizon.T = T;
  return p;
}

/// Scalar control from (time, mark) pairs.
inline ImpulseControl control(std::initializer_list<std::pair<double, double>> items) {
  std::vector<Intervention> v;
  for (auto [t, b] : items) v.push_back({t, {b}});
  return ImpulseControl(std::move(v));
}

/// X_0 = 1 in one state; X_1 is 0 or 3 with probability 1/2 each.
inline LatticeModel coin_lattice() {
  LatticeModel lat;
  lat.states = {1, 2};
  lat.kernel = {{{{0, 0.5}, {1, 0.5}}}};
  lat.initial = {1.0};
  return lat;
}

inline NodeArray coin_payoff() { return {{1.0}, {0.0, 3.0}}; }

}  // namespace fixtures
