#include <doctest.h>

#include <cmath>

#include "impulse/oracle.hpp"
#include "impulse/solver.hpp"

using namespace impulse;

namespace {

FiniteInstance single_step(std::size_t marks) {
  FiniteInstance inst;
  inst.name = "single";
  inst.lattice.states = {2, 2};
  inst.lattice.kernel = {{{{0, 1.0}}, {{1, 1.0}}}};
  inst.lattice.initial = {1.0, 0.0};
  inst.times = {0.0, 1.0};
  inst.running = {{0.0, 0.0}};
  inst.arrival = {{0.0, 0.0}, {0.0, 5.0}};
  inst.discount = {1.0, 1.0};
  for (std::size_t b = 0; b < marks; ++b) {
    inst.marks.push_back({static_cast<double>(b)});
    inst.cost.push_back({{1.0, 1.0}, {1.0, 1.0}});
    inst.impulse.push_back({{1, 1}, {1, 1}});
  }
  inst.intervention_allowed = {1, 0};
  inst.k_max = 2;
  inst.delta = 1.0;
  return inst;
}

FiniteInstance never_profitable() {
  RandomInstanceSpec s;
  s.states = 2;
  s.steps = 2;
  s.marks = 2;
  s.k_max = 2;
  FiniteInstance inst = random_instance(s, 4);
  for (auto& row : inst.running) std::fill(row.begin(), row.end(), 0.0);
  for (auto& row : inst.arrival) std::fill(row.begin(), row.end(), 0.0);
  return inst;
}

}  // namespace

TEST_CASE("brute force on the single-step instance") {
  const OracleTable bf = brute_force_value(single_step(1));
  CHECK(bf.value(1, 0, 0) == 4.0);
  CHECK(bf.value(0, 0, 0) == 0.0);
  CHECK(bf.action[1][0][0] == 0);
  CHECK(bf.root[1] == 4.0);
}

TEST_CASE("zero rewards with positive costs are worth nothing") {
  const FiniteInstance inst = never_profitable();
  const OracleTable bf = brute_force_value(inst);
  for (const auto& slice : bf.V)
    for (const auto& row : slice)
      for (double v : row) CHECK(v == 0.0);
  for (const auto& slice : bf.action)
    for (const auto& row : slice)
      for (int a : row) CHECK(a == -1);
  const EnumerationResult en = enumerate_controls_value(inst, 2);
  CHECK(en.value == 0.0);
  REQUIRE(en.optimal.size() == 1);
  CHECK(en.optimal[0].empty());
}

TEST_CASE("the j = 0 slice is the expected reward of never intervening") {
  RandomInstanceSpec s;
  s.states = 4;
  s.steps = 5;
  const FiniteInstance inst = random_instance(s, 8);
  const OracleTable bf = brute_force_value(inst, 0);
  const std::size_t n = inst.steps();
  NodeArray e(n + 1);
  e[n].assign(inst.states(n), 0.0);
  for (std::size_t t = n; t-- > 0;) {
    e[t].resize(inst.states(t));
    for (std::size_t x = 0; x < inst.states(t); ++x) {
      double acc = 0.0;
      for (const auto& tr : inst.lattice.kernel[t][x])
        acc += tr.prob * (inst.discount[t + 1] * inst.arrival[t + 1][tr.to] + e[t + 1][tr.to]);
      e[t][x] = inst.discount[t] * inst.running[t][x] + acc;
    }
  }
  for (std::size_t t = 0; t <= n; ++t)
    for (std::size_t x = 0; x < inst.states(t); ++x) CHECK(bf.value(0, t, x) == doctest::Approx(e[t][x]));
}

TEST_CASE("enumeration finds the single-step optimum and both symmetric marks") {
  const EnumerationResult one = enumerate_controls_value(single_step(1), 1);
  CHECK(one.value == 4.0);
  REQUIRE(one.optimal.size() == 1);
  REQUIRE(one.optimal[0].size() == 1);
  CHECK(one.optimal[0][0] == Decision{0, 0, 1, 0});

  const EnumerationResult two = enumerate_controls_value(single_step(2), 1);
  CHECK(two.value == 4.0);
  CHECK(two.optimal.size() == 2);
  CHECK_THROWS(enumerate_controls_value(single_step(1), 3));
}

TEST_CASE("lattice solver agrees with the oracle on a random instance") {
  const FiniteInstance inst = random_instance({}, 31);
  SolverOptions opt;
  opt.tol = 0.0;
  const LatticeValues lv = value_iteration(inst, opt);
  const LatticePolicy pol = extract_policy(inst, lv);
  const OracleTable bf = brute_force_value(inst);
  for (std::size_t j = 0; j <= inst.k_max; ++j)
    for (std::size_t t = 0; t <= inst.steps(); ++t)
      for (std::size_t x = 0; x < inst.states(t); ++x) {
        CHECK(std::abs(lv.Y[std::min(j, lv.K)][t][x] - bf.value(j, t, x)) <= 1e-10);
        CHECK(pol.act(j, t, x) == bf.action[j][t][x]);
      }
  const PolicyEvaluation mc = evaluate_policy(inst, pol, 20000, 3);
  CHECK(std::abs(mc.mean - lv.root.back()) <= 3.0 * mc.stderr_);
  CHECK(evaluate_policy_exact(inst, pol) == doctest::Approx(lv.root.back()).epsilon(1e-12));
}

TEST_CASE("closed-form Example values") {
  const double e = std::exp(1.0);
  CHECK(example_value(0.0) == doctest::Approx(0.5 * (1.0 - e)));
  CHECK(example_value(1.0) == doctest::Approx(0.5 * e - 1.0));
  CHECK(example_supremum() == doctest::Approx(0.5 * (e - 1.0)));
  for (double tau : {0.9, 0.99, 0.999}) CHECK(example_value(tau) < example_supremum());
  CHECK(example_value(0.9999) > example_value(0.999));
  CHECK(example_grid_value(4) == doctest::Approx(example_value(1.0 - 1.0 / 16)));
  CHECK(kExampleNoAction == 0.0);
}
