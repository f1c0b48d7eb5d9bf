#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "impulse/rng.hpp"
#include "impulse/snell.hpp"

using namespace impulse;

TEST_CASE("zero payoff gives a zero envelope and immediate stopping") {
  const LatticeModel lat = fixtures::coin_lattice();
  const EnvelopeEstimate env = snell_backward(lat, lat.zeros());
  for (const auto& row : env.value)
    for (double v : row) CHECK(v == 0.0);
  const StoppingResult st = optimal_stop(lat, env);
  CHECK(st.stop[0][0]);
  CHECK(st.attained_initial == 0.0);
}

TEST_CASE("one-step coin example") {
  const LatticeModel lat = fixtures::coin_lattice();
  const EnvelopeEstimate env = snell_backward(lat, fixtures::coin_payoff());
  CHECK(env.value[0][0] == 1.5);
  CHECK(env.value[1][0] == 0.0);
  CHECK(env.value[1][1] == 3.0);
  const StoppingResult st = optimal_stop(lat, env);
  CHECK_FALSE(st.stop[0][0]);
  CHECK(st.attained_initial == 1.5);
  const DoobMeyer dm = doob_meyer(lat, env);
  CHECK(dm.dK[0][0] == 0.0);
  CHECK(dm.martingale_drift[0][0] == 0.0);
}

TEST_CASE("a nonincreasing deterministic payoff is its own envelope") {
  LatticeModel lat;
  lat.states = {1, 1, 1, 1};
  lat.kernel = {{{{0, 1.0}}}, {{{0, 1.0}}}, {{{0, 1.0}}}};
  lat.initial = {1.0};
  const NodeArray X{{3.0}, {2.0}, {2.0}, {0.5}};
  const EnvelopeEstimate env = snell_backward(lat, X);
  CHECK(env.value == X);
  const DoobMeyer dm = doob_meyer(lat, env);
  CHECK(dm.dK[0][0] == 1.0);
  CHECK(dm.dK[1][0] == 0.0);
  CHECK(dm.dK[2][0] == 1.5);
  CHECK(optimal_stop(lat, env).stop[0][0]);
}

TEST_CASE("a payoff that only pays at the end stops at the terminal step") {
  LatticeModel lat;
  lat.states = {1, 1, 1};
  lat.kernel = {{{{0, 1.0}}}, {{{0, 1.0}}}};
  lat.initial = {1.0};
  const NodeArray X{{0.0}, {0.5}, {1.0}};
  const EnvelopeEstimate env = snell_backward(lat, X);
  CHECK_FALSE(env.stop[0][0]);
  CHECK_FALSE(env.stop[1][0]);
  CHECK(env.stop[2][0]);
  // A martingale envelope has no predictable part.
  const DoobMeyer dm = doob_meyer(lat, env);
  CHECK(dm.dK[0][0] == 0.0);
  CHECK(dm.dK[1][0] == 0.0);
}

TEST_CASE("envelope invariants and minimality on a random lattice") {
  const LatticeModel lat = random_lattice(6, 4, 77);
  Rng rng(77, 1);
  NodeArray X = lat.zeros();
  for (auto& row : X)
    for (double& v : row) v = rng.uniform();
  const EnvelopeEstimate env = snell_backward(lat, X);
  const std::size_t n = lat.steps();
  for (std::size_t t = 0; t <= n; ++t)
    for (std::size_t x = 0; x < lat.states[t]; ++x) {
      CHECK(env.value[t][x] >= X[t][x]);
      if (t < n) CHECK(env.value[t][x] - lat.expect(env.value, t, x) >= -1e-12);
    }
  CHECK(env.value[n] == X[n]);
  // Lowering Z where it is strictly above X breaks the supermartingale property.
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t x = 0; x < lat.states[t]; ++x) {
      if (env.value[t][x] <= X[t][x]) continue;
      const double eps = 1e-6;
      CHECK(env.value[t][x] - eps < lat.expect(env.value, t, x) + 1e-15);
    }
}

TEST_CASE("no-information envelopes share one decision per step") {
  LatticeModel lat = fixtures::coin_lattice();
  lat.states = {1, 2, 2};
  lat.kernel.push_back({{{0, 1.0}}, {{1, 1.0}}});
  lat.information = Information::None;
  const NodeArray X{{1.0}, {0.0, 3.0}, {0.0, 0.0}};
  const EnvelopeEstimate env = snell_backward(lat, X);
  CHECK(env.stop[1][0] == env.stop[1][1]);
  CHECK(optimal_stop(lat, env).attained_initial == 1.5);
}

TEST_CASE("regression on degenerate paths with an indicator basis is exact") {
  // Each lattice path is repeated so every indicator cell has enough rows.
  const Eigen::Index reps = 10;
  RegressionData d;
  d.features = {Eigen::MatrixXd::Zero(2 * reps, 1), Eigen::MatrixXd(2 * reps, 1)};
  d.payoff = {std::vector<double>(2 * reps, 1.0), std::vector<double>(2 * reps)};
  for (Eigen::Index i = 0; i < 2 * reps; ++i) {
    d.features[1](i, 0) = static_cast<double>(i % 2);
    d.payoff[1][static_cast<std::size_t>(i)] = i % 2 == 0 ? 0.0 : 3.0;
  }
  const EnvelopeEstimate env = snell_regression(d, {Basis::Kind::Indicator, 0});
  CHECK(env.mode == EnvelopeMode::Regression);
  CHECK(env.root_value == doctest::Approx(1.5).epsilon(1e-12));

  RegressionData z;
  z.features = {Eigen::MatrixXd::Random(50, 1), Eigen::MatrixXd::Random(50, 1)};
  z.payoff = {std::vector<double>(50, 0.0), std::vector<double>(50, 0.0)};
  CHECK(snell_regression(z, {Basis::Kind::Polynomial, 2}).root_value == 0.0);
}

namespace {

// Bermudan put on a binomial tree restricted to the exercise dates.
double bermudan_tree(double S0, double K, double r, double sigma, double T, int dates, int per_date) {
  const int n = dates * per_date;
  const double dt = T / n, u = std::exp(sigma * std::sqrt(dt)), d = 1.0 / u;
  const double p = (std::exp(r * dt) - d) / (u - d), disc = std::exp(-r * dt);
  std::vector<double> v(n + 1);
  for (int i = 0; i <= n; ++i) v[i] = std::max(K - S0 * std::pow(u, 2 * i - n), 0.0);
  for (int s = n - 1; s >= 0; --s) {
    for (int i = 0; i <= s; ++i) {
      v[i] = disc * (p * v[i + 1] + (1 - p) * v[i]);
      if (s % per_date == 0) v[i] = std::max(v[i], K - S0 * std::pow(u, 2 * i - s));
    }
  }
  return v[0];
}

}  // namespace

TEST_CASE("least-squares Bermudan put matches a fine tree") {
  const double S0 = 1.0, K = 1.0, r = 0.05, sigma = 0.2, T = 1.0;
  const int dates = 8;
  const std::size_t n = 40000;
  RegressionData d;
  d.features.assign(dates + 1, Eigen::MatrixXd(n, 1));
  d.payoff.assign(dates + 1, std::vector<double>(n));
  Rng rng(5, 0);
  const double dt = T / dates;
  for (std::size_t p = 0; p < n; ++p) {
    double S = S0;
    for (int t = 0; t <= dates; ++t) {
      if (t > 0) S *= std::exp((r - 0.5 * sigma * sigma) * dt + sigma * std::sqrt(dt) * rng.normal());
      d.features[t](static_cast<Eigen::Index>(p), 0) = S;
      d.payoff[t][p] = std::exp(-r * t * dt) * std::max(K - S, 0.0);
    }
  }
  const EnvelopeEstimate env = snell_regression(d, {Basis::Kind::Polynomial, 3});
  const double ref = bermudan_tree(S0, K, r, sigma, T, dates, 400);
  CHECK(env.root_stderr > 0.0);
  CHECK(std::abs(env.root_value - ref) <= 3.0 * env.root_stderr);
}

TEST_CASE("lattice check rejects bad kernels") {
  LatticeModel lat = fixtures::coin_lattice();
  CHECK_NOTHROW(lat.check());
  lat.kernel[0][0][0].prob = 0.4;
  CHECK_THROWS(lat.check());
}
