#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "impulse/builtin.hpp"
#include "impulse/errors.hpp"
#include "impulse/sfde.hpp"

using namespace impulse;

namespace {

ProblemSpec reset_problem() {
  ProblemSpec p = fixtures::still_problem(1.0);
  p.coef.impulse = scalar_impulse([](double, double, double b) { return b; });
  p.marks = MarkSet::interval(0.0, 4.0, 6);
  p.growth.K_gamma = 4.0;
  return p;
}

ProblemSpec gbm(double a, double s) {
  ProblemSpec p = fixtures::still_problem(1.0);
  p.coef.drift = scalar_field([a](double, double x) { return a * x; });
  p.coef.diffusion = scalar_field([s](double, double x) { return s * x; });
  return p;
}

}  // namespace

TEST_CASE("zero dynamics give a constant path") {
  const ProblemSpec p = fixtures::still_problem(1.0);
  const CadlagPath path = Simulator(p, DyadicGrid(3, 1.0)).simulate(ImpulseControl{}, 1);
  REQUIRE(path.complete());
  for (std::size_t i = 0; i < path.grid().size(); ++i) CHECK(path.right(i)[0] == 1.0);
}

TEST_CASE("pure reset dynamics jump to the mark at the intervention") {
  const ProblemSpec p = reset_problem();
  const ImpulseControl u = fixtures::control({{0.5, 2.0}});
  const CadlagPath path = Simulator(p, DyadicGrid(3, 1.0)).simulate(u, 1);
  for (std::size_t i = 0; i < path.grid().size(); ++i) {
    const double t = path.grid().time(i);
    CHECK(path.right(i)[0] == (t < 0.5 ? 1.0 : 2.0));
  }
  CHECK(path.read(0.5, Side::Left)[0] == 1.0);
  REQUIRE(path.impulses().size() == 1);
  CHECK(path.impulses()[0].pre[0] == 1.0);
  CHECK(path.impulses()[0].post[0] == 2.0);
}

TEST_CASE("Euler is exact for constant drift") {
  ProblemSpec p = fixtures::still_problem(0.0);
  p.coef.drift = scalar_field([](double, double) { return 1.0; });
  const CadlagPath path = Simulator(p, DyadicGrid(5, 1.0)).simulate(ImpulseControl{}, 9);
  CHECK(path.right(path.grid().last())[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("intervention times must be grid nodes unless snapped") {
  const ProblemSpec p = reset_problem();
  const DyadicGrid g(3, 1.0);
  const ImpulseControl u = fixtures::control({{0.3, 2.0}});
  CHECK_THROWS_AS(Simulator(p, g).simulate(u, 1), InvalidInput);
  const ImpulseControl s = snap_to_grid(u, g);
  CHECK(s[0].time == 0.375);
  CHECK_NOTHROW(Simulator(p, g).simulate(s, 1));
}

TEST_CASE("simultaneous impulses apply in list order") {
  ProblemSpec p = reset_problem();
  p.coef.impulse = scalar_impulse([](double, double x, double b) { return x / 2 + b; });
  const ImpulseControl u = fixtures::control({{0.5, 1.0}, {0.5, 0.5}});
  const CadlagPath path = Simulator(p, DyadicGrid(2, 1.0)).simulate(u, 1);
  // 1 -> 1.5 -> 1.25
  CHECK(path.right(2)[0] == 1.25);
  CHECK(path.impulses().size() == 2);
}

TEST_CASE("apply_impulse enforces the growth bound") {
  ProblemSpec p = reset_problem();
  CadlagPath path(DyadicGrid(1, 1.0), 1, p.history);
  const double x = 1.0;
  const PathView view(path, 0, std::span(&x, 1));
  CHECK(apply_impulse(p, view, {3.0})[0] == 3.0);

  p.coef.impulse = scalar_impulse([](double, double y, double) { return y; });
  CHECK(apply_impulse(p, view, {3.0})[0] == 1.0);

  p.coef.impulse = scalar_impulse([&](double, double y, double) { return p.growth.K_gamma + std::abs(y) + 1.0; });
  CHECK_THROWS_AS(apply_impulse(p, view, {3.0}), CoefficientContractError);
  CHECK_THROWS_AS(apply_impulse(p, view, {9.0}), MarkDomainError);
}

TEST_CASE("overflow raises a divergence error naming the step") {
  ProblemSpec p = fixtures::still_problem(1e200);
  p.coef.drift = scalar_field([](double, double x) { return x * x; });
  try {
    Simulator(p, DyadicGrid(3, 1.0)).simulate(ImpulseControl{}, 1);
    FAIL("expected divergence");
  } catch (const SimulationDiverged& e) {
    CHECK(e.step() == 1);
  }
}

TEST_CASE("simulation is deterministic and local in the control") {
  const Builtin m = builtin("merton");
  const Simulator sim(m.problem, DyadicGrid(6, 1.0));
  const CadlagPath a = sim.simulate(ImpulseControl{}, 17);
  const CadlagPath b = sim.simulate(ImpulseControl{}, 17);
  const CadlagPath c = sim.simulate(fixtures::control({{0.5, 1.0}}), 17);
  for (std::size_t i = 0; i < a.grid().size(); ++i) {
    CHECK(a.left(i)[0] == b.left(i)[0]);
    CHECK(a.right(i)[0] == b.right(i)[0]);
    if (a.grid().time(i) < 0.5) CHECK(a.right(i)[0] == c.right(i)[0]);
  }
  CHECK(a.read(0.5, Side::Left)[0] == c.read(0.5, Side::Left)[0]);
}

TEST_CASE("coarsened tapes keep the same Brownian motion") {
  const ProblemSpec p = gbm(0.0, 0.0);
  const DyadicGrid fine(6, 1.0);
  const NoiseTape t = draw_noise(p, fine, 3, 0);
  const NoiseTape c = coarsen(t, 3);
  CHECK(c.steps == 8);
  double wf = 0.0, wc = 0.0;
  for (std::size_t i = 0; i < t.steps; ++i) wf += t.normal(i, 0) * std::sqrt(fine.step());
  for (std::size_t i = 0; i < c.steps; ++i) wc += c.normal(i, 0) * std::sqrt(0.125);
  CHECK(wc == doctest::Approx(wf).epsilon(1e-12));
  CHECK_THROWS_AS(coarsen(c, 6), InvalidInput);
}

TEST_CASE("strong error shrinks under grid refinement") {
  const ProblemSpec p = gbm(0.1, 0.4);
  const int top = 11;
  auto err = [&](int l) {
    double s = 0.0;
    const std::size_t n = 400;
    for (std::size_t k = 0; k < n; ++k) {
      const NoiseTape f = draw_noise(p, DyadicGrid(top, 1.0), 5, k);
      const CadlagPath a = Simulator(p, DyadicGrid(l, 1.0)).simulate(ImpulseControl{}, coarsen(f, l));
      const CadlagPath b = Simulator(p, DyadicGrid(l + 2, 1.0)).simulate(ImpulseControl{}, coarsen(f, l + 2));
      double d = 0.0;
      for (std::size_t i = 0; i < a.grid().size(); ++i) d = std::max(d, std::abs(a.right(i)[0] - b.right(4 * i)[0]));
      s += d;
    }
    return s / n;
  };
  double prev = err(4);
  for (int l = 5; l <= 9; ++l) {
    const double e = err(l);
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("jumps are compensated") {
  const Builtin m = builtin("merton");
  const Simulator sim(m.problem, DyadicGrid(6, 1.0));
  const std::size_t n = 20000;
  double s = 0.0, s2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = sim.simulate(ImpulseControl{}, 4, k).right(64)[0];
    s += x;
    s2 += x * x;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - std::pow(1.0 + 0.05 / 64, 64)) < 4 * se);
}

TEST_CASE("moment estimates on deterministic paths are exact") {
  const DyadicGrid g(4, 1.0);
  const MomentEstimate zero = moment_estimate(fixtures::still_problem(0.0), {ImpulseControl{}}, g, 2, 10, 1);
  CHECK(zero.mean == 0.0);
  CHECK(zero.stderr_ == 0.0);

  ProblemSpec ramp = fixtures::still_problem(0.0);
  ramp.coef.drift = scalar_field([](double, double) { return 1.0; });
  const MomentEstimate one = moment_estimate(ramp, {ImpulseControl{}}, g, 2, 10, 1);
  CHECK(one.mean == doctest::Approx(1.0));
  CHECK(one.stderr_ == doctest::Approx(0.0));
  CHECK_THROWS_AS(moment_estimate(ramp, {ImpulseControl{}}, g, 6, 10, 1), InvalidInput);
}

TEST_CASE("moment estimate for GBM matches an exact-step reference") {
  const ProblemSpec p = gbm(0.1, 0.2);
  const DyadicGrid g(10, 1.0);
  const std::size_t n = 20000;
  const MomentEstimate est = moment_estimate(p, {ImpulseControl{}}, g, 2, n, 11, 4);

  // Independent reference: exact lognormal steps from a separate generator.
  std::mt19937_64 gen(99);
  std::normal_distribution<double> z;
  const double dt = g.step(), drift = (0.1 - 0.02) * dt, vol = 0.2 * std::sqrt(dt);
  double s = 0.0, s2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double x = 1.0, m = 1.0;
    for (std::size_t i = 0; i < g.last(); ++i) {
      x *= std::exp(drift + vol * z(gen));
      m = std::max(m, x);
    }
    s += m * m;
    s2 += m * m * m * m;
  }
  const double ref = s / n, ref_se = std::sqrt((s2 / n - ref * ref) / n);
  CHECK(std::abs(est.mean - ref) <= 3.0 * std::hypot(est.stderr_, ref_se));
}

TEST_CASE("moment estimate takes the maximum over controls") {
  const ProblemSpec p = reset_problem();
  const DyadicGrid g(3, 1.0);
  const MomentEstimate e = moment_estimate(p, {ImpulseControl{}, fixtures::control({{0.5, 3.0}})}, g, 2, 5, 1);
  CHECK(e.argmax == 1);
  CHECK(e.mean == 9.0);
  CHECK(e.per_control[0] == 1.0);
}

TEST_CASE("flow test on pure resets") {
  const ProblemSpec p = reset_problem();
  const DyadicGrid g(8, 1.0);
  std::vector<std::pair<double, double>> deltas;
  for (int k = 2; k <= 5; ++k) deltas.push_back({0.0, std::ldexp(1.0, -k)});
  const FlowTable ft = flow_perturbation_test(p, {}, {}, 0.25, {1.0}, deltas, g, 10, 3);
  CHECK(ft.exponent == 4.0);
  for (const FlowRow& r : ft.rows) CHECK(r.moment == doctest::Approx(std::pow(r.db, 4)));
  CHECK(ft.slope == doctest::Approx(4.0));

  const FlowTable none = flow_perturbation_test(p, {}, {}, 0.25, {1.0}, {{0.0, 0.0}}, g, 10, 3);
  CHECK(none.rows[0].moment == 0.0);
}
