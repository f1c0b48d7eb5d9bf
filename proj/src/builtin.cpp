#include "impulse/builtin.hpp"

#include <cmath>

#include "impulse/errors.hpp"

namespace impulse {

namespace {

CostPiece flat_cost(MarkSet domain, std::function<double(double t, double x, double b)> f) {
  return {std::move(domain), [f = std::move(f)](double t, std::span<const double> x, const Mark& b) {
            return f(t, x[0], b.at(0));
          }};
}

ScalarField scalar(std::function<double(double, double)> f) {
  return [f = std::move(f)](double t, std::span<const double> x) { return f(t, x[0]); };
}

MarkSet points(std::vector<double> bs) {
  std::vector<Mark> m;
  for (double b : bs) m.push_back({b});
  return MarkSet::finite(std::move(m));
}

ProblemSpec scalar_problem(std::string name, double x0) {
  ProblemSpec p;
  p.name = std::move(name);
  p.dim = 1;
  p.history = constant_history({x0});
  p.coef.drift = zero_field();
  p.coef.diffusion = zero_field();
  p.coef.impulse = scalar_impulse([](double, double, double b) { return b; });
  return p;
}

Builtin example() {
  Builtin out;
  auto& p = out.problem;
  p = scalar_problem("example", 0.0);
  p.coef.impulse = scalar_impulse([](double, double, double) { return 1.0; });
  p.marks = points({1.0});
  p.reward.running = [](double, std::span<const double>) { return 0.0; };
  p.reward.terminal = scalar([](double t, double x) { return x * std::exp(std::abs(t - 1.0)); });
  p.reward.costs = {flat_cost(p.marks, [](double t, double, double) { return std::exp(std::abs(t - 1.0)); })};
  p.reward.floor = [](double) { return 1.0; };
  p.horizon.mode = HorizonMode::RandomHorizon;
  p.horizon.T = 2.0;
  p.horizon.eta_atoms = {{1.0, 0.5}, {2.0, 0.5}};
  p.horizon.information = EtaInformation::Hidden;
  out.lattice.level = 4;
  out.lattice.horizon = 2.0;
  out.lattice.points = {0.0, 1.0};
  out.lattice.k_max = 3;
  out.summary = "trivial filtration, eta in {1, 2}, one reset to 1 at cost e^|t-1|; sup 0.5(e-1) not attained";
  return out;
}

Builtin gbm_reset() {
  Builtin out;
  auto& p = out.problem;
  p = scalar_problem("gbm-reset", 1.0);
  p.coef.drift = scalar_field([](double, double x) { return 0.05 * x; });
  p.coef.diffusion = scalar_field([](double, double x) { return 0.3 * x; });
  p.marks = points({0.9, 1.0, 1.1});
  p.reward.running = scalar([](double, double x) { return 1.0 - 2.0 * (x - 1.0) * (x - 1.0); });
  p.reward.costs = {flat_cost(p.marks, [](double, double x, double b) { return 0.1 + 0.1 * std::abs(x - b); })};
  p.reward.discount = [](double t) { return 0.1 * t; };
  p.reward.floor = [](double) { return 0.1; };
  p.reward.epsilon = 0.1;
  p.horizon.T = 1.0;
  out.lattice.level = 3;
  out.lattice.horizon = 1.0;
  out.lattice.x_min = 0.2;
  out.lattice.x_max = 3.0;
  out.lattice.dx = 0.0025;
  out.lattice.sd_cut = 8.0;
  out.summary = "GBM(0.05, 0.3) with running reward 1 - 2(x-1)^2 and resets to {0.9, 1, 1.1}";
  return out;
}

Builtin ou_discounted() {
  Builtin out;
  auto& p = out.problem;
  p = scalar_problem("ou-discounted", 1.0);
  p.coef.drift = scalar_field([](double, double x) { return -x; });
  p.coef.diffusion = scalar_field([](double, double) { return 0.3; });
  p.marks = points({0.0});
  p.reward.running = scalar([](double, double x) { return 1.0 / (1.0 + x * x); });
  p.reward.costs = {flat_cost(p.marks, [](double, double, double) { return 0.1; })};
  p.reward.discount = [](double t) { return t; };
  p.reward.floor = [](double) { return 0.1; };
  p.reward.epsilon = 1.0;
  p.horizon.T = 8.0;
  out.lattice.level = 3;
  out.lattice.horizon = 8.0;
  out.lattice.x_min = -2.0;
  out.lattice.x_max = 2.0;
  out.lattice.dx = 0.02;
  out.summary = "OU dX = -X dt + 0.3 dB, reward 1/(1+x^2), resets to 0, rho(t) = t";
  return out;
}

Builtin gbm_flow() {
  Builtin out;
  auto& p = out.problem;
  p = scalar_problem("gbm-flow", 1.0);
  p.coef.drift = scalar_field([](double, double x) { return 0.1 * x; });
  p.coef.diffusion = scalar_field([](double, double x) { return 0.2 * x; });
  p.marks = MarkSet::interval(0.5, 1.5, 6);
  p.reward.running = scalar([](double, double x) { return -(x - 1.0) * (x - 1.0); });
  p.reward.costs = {flat_cost(p.marks, [](double, double, double) { return 0.1; })};
  p.reward.floor = [](double) { return 0.1; };
  p.horizon.T = 1.0;
  out.lattice.level = 6;
  out.lattice.horizon = 1.0;
  out.lattice.x_min = 0.2;
  out.lattice.x_max = 3.0;
  out.lattice.dx = 0.01;
  out.summary = "GBM a = 0.1x, sigma = 0.2x with resets to b in [0.5, 1.5]";
  return out;
}

Builtin merton() {
  Builtin out;
  auto& p = out.problem;
  p = scalar_problem("merton", 1.0);
  p.coef.drift = scalar_field([](double, double x) { return 0.05 * x; });
  p.coef.diffusion = scalar_field([](double, double x) { return 0.2 * x; });
  p.coef.jump_rate = 1.0;
  p.coef.jump_sampler = [](Rng& rng) { return -0.1 + 0.15 * rng.normal(); };
  p.coef.jump = scalar_jump([](double, double x, double z) { return x * std::expm1(z); });
  p.coef.jump_mean = scalar_field([](double, double x) { return x * std::expm1(-0.1 + 0.5 * 0.15 * 0.15); });
  p.coef.jump_bound = [](double z) { return std::abs(std::expm1(z)); };
  p.marks = points({1.0});
  p.reward.running = scalar([](double, double x) { return -(x - 1.0) * (x - 1.0); });
  p.reward.costs = {flat_cost(p.marks, [](double, double, double) { return 0.2; })};
  p.reward.discount = [](double t) { return 0.05 * t; };
  p.reward.floor = [](double) { return 0.2; };
  p.reward.epsilon = 0.05;
  p.horizon.T = 1.0;
  out.lattice.level = 6;
  out.lattice.horizon = 1.0;
  out.summary = "GBM with lognormal compound Poisson jumps (rate 1) and resets to 1";
  return out;
}

Builtin zero() {
  Builtin out;
  auto& p = out.problem;
  p = scalar_problem("zero", 0.0);
  p.coef.diffusion = scalar_field([](double, double) { return 0.2; });
  p.marks = points({0.0, 1.0});
  p.reward.running = [](double, std::span<const double>) { return 0.0; };
  p.reward.costs = {flat_cost(p.marks, [](double, double, double) { return 0.5; })};
  p.reward.floor = [](double) { return 0.5; };
  p.horizon.T = 1.0;
  out.lattice.level = 4;
  out.lattice.horizon = 1.0;
  out.lattice.x_min = -1.0;
  out.lattice.x_max = 1.0;
  out.lattice.dx = 0.1;
  out.summary = "zero rewards with positive costs";
  return out;
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"example", "gbm-reset", "ou-discounted", "gbm-flow", "merton", "zero"};
}

Builtin builtin(const std::string& name) {
  if (name == "example") return example();
  if (name == "gbm-reset") return gbm_reset();
  if (name == "ou-discounted") return ou_discounted();
  if (name == "gbm-flow") return gbm_flow();
  if (name == "merton") return merton();
  if (name == "zero") return zero();
  throw InvalidInput("unknown problem '" + name + "'");
}

}  // namespace impulse
