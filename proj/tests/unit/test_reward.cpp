#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "impulse/builtin.hpp"
#include "impulse/errors.hpp"
#include "impulse/reward.hpp"
#include "impulse/sfde.hpp"

using namespace impulse;

namespace {

ProblemSpec two_piece() {
  ProblemSpec p = fixtures::still_problem(0.0, 2.0);
  p.marks = MarkSet::interval(0.0, 1.0, 4);
  p.reward.costs = {
      {MarkSet::interval(0.0, 1.0, 4), [](double, std::span<const double>, const Mark& b) { return 1.0 + b[0]; }},
      {MarkSet::interval(0.5, 1.0, 4), [](double, std::span<const double>, const Mark& b) { return 3.0 - b[0]; }},
  };
  return p;
}

CadlagPath still_path(const ProblemSpec& p, int level, double T) {
  return Simulator(p, DyadicGrid(level, T)).simulate(ImpulseControl{}, 1);
}

}  // namespace

TEST_CASE("cost takes the minimum over applicable pieces") {
  const ProblemSpec p = two_piece();
  const CadlagPath path = still_path(p, 2, 2.0);
  CHECK(cost(p, 0.0, path, {0.75}, 0.0) == doctest::Approx(1.75));
  CHECK(cost(p, 0.0, path, {0.25}, 0.0) == doctest::Approx(1.25));
  CHECK(cost_piece_min(p, 0.0, path.right(0), {1.0}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(cost(p, 0.0, path, {-1.0}, 0.0), MarkDomainError);
}

TEST_CASE("cost is discounted at the later of t and the last intervention") {
  ProblemSpec p = fixtures::still_problem(0.0, 2.0);
  p.reward.discount = [](double t) { return t; };
  const CadlagPath path = still_path(p, 2, 2.0);
  CHECK(cost(p, 0.5, path, {0.0}, 2.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(cost(p, 2.0, path, {0.0}, 0.5) == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("discounted cost stays above the discounted floor") {
  const ProblemSpec p = two_piece();
  const CadlagPath path = still_path(p, 2, 2.0);
  for (const Mark& b : p.marks.points())
    for (double t : {0.0, 0.5, 1.0}) CHECK(cost(p, t, path, b, 0.0) >= p.disc(t) * p.delta(t));
}

TEST_CASE("cost at piece boundaries equals the pointwise minimum") {
  const ProblemSpec p = two_piece();
  const State x{0.0};
  // At b = 0.5 both pieces apply: min(1.5, 2.5).
  CHECK(cost_piece_min(p, 0.0, x, {0.5}) == doctest::Approx(1.5));
  // Limits from within each piece are not below the min.
  CHECK(1.0 + 0.5 >= cost_piece_min(p, 0.0, x, {0.5}));
  CHECK(3.0 - 0.5 >= cost_piece_min(p, 0.0, x, {0.5}));
}

TEST_CASE("running integral uses the left rule") {
  ProblemSpec p = fixtures::still_problem(0.0);
  CHECK(running_integral(p, still_path(p, 3, 1.0), 1.0) == 0.0);

  p.reward.running = [](double, std::span<const double>) { return 1.0; };
  CHECK(running_integral(p, still_path(p, 3, 1.0), 1.0) == doctest::Approx(1.0));

  p.reward.running = [](double, std::span<const double> x) { return x[0]; };
  p.coef.drift = scalar_field([](double, double) { return 1.0; });
  for (int l = 2; l <= 8; l += 2) {
    const double got = running_integral(p, still_path(p, l, 1.0), 1.0);
    CHECK(got == doctest::Approx(0.5 * (1.0 - std::ldexp(1.0, -l))).epsilon(1e-12));
  }
}

TEST_CASE("sample reward without interventions is the running integral") {
  const Builtin g = builtin("gbm-reset");
  const CadlagPath path = Simulator(g.problem, DyadicGrid(6, 1.0)).simulate(ImpulseControl{}, 3);
  CHECK(sample_reward(g.problem, ImpulseControl{}, path, RewardMode::Infinite) ==
        doctest::Approx(running_integral(g.problem, path, 1.0)));
  const ProblemSpec z = fixtures::still_problem(0.0);
  CHECK(sample_reward(z, ImpulseControl{}, still_path(z, 3, 1.0), RewardMode::Infinite) == 0.0);
}

TEST_CASE("random horizon disregards interventions at the horizon in the terminal reward") {
  const Builtin ex = builtin("example");
  const ImpulseControl u = fixtures::control({{1.0, 1.0}});
  const CadlagPath path = Simulator(ex.problem, DyadicGrid(4, 2.0)).simulate(u, 1);
  CHECK(sample_reward(ex.problem, u, path, RewardMode::RandomHorizon, 1.0) == doctest::Approx(-1.0));
  CHECK(sample_reward(ex.problem, u, path, RewardMode::RandomHorizon, 2.0) == doctest::Approx(std::exp(1.0) - 1.0));
  CHECK(sample_reward(ex.problem, ImpulseControl{}, Simulator(ex.problem, DyadicGrid(4, 2.0)).simulate({}, 1),
                      RewardMode::RandomHorizon, 2.0) == 0.0);
}

TEST_CASE("appending interventions after the horizon never helps") {
  const Builtin ex = builtin("example");
  const Simulator sim(ex.problem, DyadicGrid(3, 2.0));
  const ImpulseControl u = fixtures::control({{0.5, 1.0}});
  const ImpulseControl longer = compose(u, fixtures::control({{1.5, 1.0}}));
  const double base = sample_reward(ex.problem, u, sim.simulate(u, 2), RewardMode::RandomHorizon, 1.0);
  const double more = sample_reward(ex.problem, longer, sim.simulate(longer, 2), RewardMode::RandomHorizon, 1.0);
  CHECK(more < base);
}

TEST_CASE("state clamp") {
  CHECK(clamp_state(State{2.0}, 1.0)[0] == 1.0);
  CHECK(clamp_state(State{-0.5}, 1.0)[0] == -0.5);
  const State v = clamp_state(State{3.0, 4.0}, 1.0);
  CHECK(std::hypot(v[0], v[1]) == doctest::Approx(1.0));
}

TEST_CASE("truncated psi drops costs at or after T and is inert for large L") {
  ProblemSpec p = fixtures::still_problem(2.0, 2.0);
  p.coef.impulse = scalar_impulse([](double, double, double b) { return b; });
  p.marks = MarkSet::finite({{1.0}, {2.0}});
  p.reward.costs = {{p.marks, [](double, std::span<const double>, const Mark&) { return 1.0; }}};
  p.reward.running = [](double, std::span<const double> x) { return x[0]; };
  const Simulator sim(p, DyadicGrid(2, 2.0));
  const ImpulseControl v;
  const ImpulseControl u = fixtures::control({{1.5, 2.0}});
  const ImpulseControl full = compose(compose(v, fixtures::control({{0.5, 1.0}})), u);
  const CadlagPath path = sim.simulate(full, 1);
  // T = 1: the u intervention at 1.5 is outside, φ integrates 2 * 0.5 + 1 * 0.5.
  CHECK(truncated_psi(p, v, u, 0.5, {1.0}, 1.0, 1e9, path) == doctest::Approx(1.5));
  // L = 1 clamps the initial state 2 to 1 before φ.
  CHECK(truncated_psi(p, v, u, 0.5, {1.0}, 1.0, 1.0, path) == doctest::Approx(1.0));
  // T beyond the grid and L large: full integral minus the one u cost.
  CHECK(truncated_psi(p, v, u, 0.5, {1.0}, 10.0, 1e9, path) == doctest::Approx(1.0 + 1.0 + 1.0 - 1.0));
}

TEST_CASE("admissibility report on trivial and discounted instances") {
  AdmissibilityOptions opt;
  opt.n_paths = 200;
  const ProblemSpec zero = builtin("zero").problem;
  const AdmissibilityReport z = admissibility_report(zero, opt);
  CHECK(z.reward_second_moment == 0.0);
  CHECK(z.running_fit.trivial);
  CHECK(z.running_fit.decays);

  const Builtin ou = builtin("ou-discounted");
  opt.n_paths = 500;
  const AdmissibilityReport r = admissibility_report(ou.problem, opt);
  CHECK(r.running_fit.rate >= 0.9 * ou.problem.reward.epsilon);
  CHECK(r.cost_floor_ok);
  CHECK(r.to_json().contains("running_fit"));

  ProblemSpec bad = ou.problem;
  bad.reward.floor = [](double) { return 0.0; };
  const AdmissibilityReport f = admissibility_report(bad, opt);
  CHECK_FALSE(f.cost_floor_ok);
  CHECK(std::find(f.flags.begin(), f.flags.end(), "cost floor violated") != f.flags.end());
}

TEST_CASE("exponential tail fit recovers a known rate") {
  const std::vector<double> T{1, 2, 3, 4};
  std::vector<double> v;
  for (double t : T) v.push_back(2.0 * std::exp(-0.7 * t));
  const TailFit f = fit_exponential(T, v);
  CHECK(f.rate == doctest::Approx(0.7));
  CHECK(f.C == doctest::Approx(2.0));
  CHECK(f.decays);
}
