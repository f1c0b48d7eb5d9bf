#include "impulse/snell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "impulse/errors.hpp"

namespace impulse {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_payoff(const LatticeModel& lat, const NodeArray& payoff, const NodeArray* running) {
  if (payoff.size() != lat.states.size()) throw InvalidInput("payoff has the wrong number of steps");
  for (std::size_t t = 0; t < payoff.size(); ++t) {
    if (payoff[t].size() != lat.states[t]) throw InvalidInput("payoff has the wrong number of states");
    for (double v : payoff[t])
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
        throw InvalidInput("payoff must be finite or -inf");
  }
  for (double v : payoff.back())
    if (!std::isfinite(v)) throw InvalidInput("terminal payoff must be finite");
  if (running && !running->empty()) {
    if (running->size() < lat.steps()) throw InvalidInput("running reward has the wrong number of steps");
    for (std::size_t t = 0; t < lat.steps(); ++t)
      if ((*running)[t].size() != lat.states[t]) throw InvalidInput("running reward has the wrong number of states");
  }
}

double run_at(const NodeArray* running, std::size_t t, std::size_t x) {
  return (running && !running->empty()) ? (*running)[t][x] : 0.0;
}
}  // namespace

void LatticeModel::check() const {
  if (states.size() < 2) throw InvalidInput("lattice needs at least one step");
  if (kernel.size() != steps()) throw InvalidInput("lattice kernel has the wrong number of steps");
  for (std::size_t t = 0; t <= steps(); ++t)
    if (states[t] == 0) throw InvalidInput("lattice step " + std::to_string(t) + " has no states");
  for (std::size_t t = 0; t < steps(); ++t) {
    if (kernel[t].size() != states[t]) throw InvalidInput("kernel rows at step " + std::to_string(t) + " do not match states");
    for (std::size_t x = 0; x < states[t]; ++x) {
      double sum = 0.0;
      for (const auto& tr : kernel[t][x]) {
        if (tr.to >= states[t + 1]) throw InvalidInput("kernel points to a missing state");
        if (!(tr.prob >= 0.0) || !std::isfinite(tr.prob)) throw InvalidInput("kernel probability must be nonnegative");
        sum += tr.prob;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw InvalidInput("kernel row (" + std::to_string(t) + ", " + std::to_string(x) + ") sums to " +
                           std::to_string(sum));
    }
  }
  if (initial.size() != states[0]) throw InvalidInput("initial distribution has the wrong size");
  double s = 0.0;
  for (double p : initial) {
    if (!(p >= 0.0)) throw InvalidInput("initial probabilities must be nonnegative");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) throw InvalidInput("initial distribution does not sum to 1");
}

NodeArray LatticeModel::zeros() const {
  NodeArray a(states.size());
  for (std::size_t t = 0; t < states.size(); ++t) a[t].assign(states[t], 0.0);
  return a;
}

double LatticeModel::expect(const NodeArray& f, std::size_t t, std::size_t x) const {
  double s = 0.0;
  for (const auto& tr : kernel[t][x]) s += tr.prob * f[t + 1][tr.to];
  return s;
}

NodeArray LatticeModel::marginals() const {
  NodeArray m = zeros();
  m[0] = initial;
  for (std::size_t t = 0; t < steps(); ++t)
    for (std::size_t x = 0; x < states[t]; ++x) {
      if (m[t][x] == 0.0) continue;
      for (const auto& tr : kernel[t][x]) m[t + 1][tr.to] += m[t][x] * tr.prob;
    }
  return m;
}

EnvelopeEstimate snell_backward(const LatticeModel& lat, const NodeArray& payoff, const NodeArray* running) {
  check_payoff(lat, payoff, running);
  const std::size_t n = lat.steps();
  EnvelopeEstimate env;
  env.mode = EnvelopeMode::Exact;
  env.payoff = payoff;
  if (running) env.running = *running;
  env.value = lat.zeros();
  env.continuation = lat.zeros();
  env.stop.resize(n + 1);
  for (std::size_t t = 0; t <= n; ++t) env.stop[t].assign(lat.states[t], 0);

  if (lat.information == Information::Full) {
    env.value[n] = payoff[n];
    env.stop[n].assign(lat.states[n], 1);
    for (std::size_t t = n; t-- > 0;) {
      for (std::size_t x = 0; x < lat.states[t]; ++x) {
        const double c = run_at(running, t, x) + lat.expect(env.value, t, x);
        env.continuation[t][x] = c;
        const double X = payoff[t][x];
        env.stop[t][x] = X >= c ? 1 : 0;
        env.value[t][x] = X >= c ? X : c;
      }
    }
    return env;
  }

  // Trivial filtration: stopping times are deterministic steps.
  const NodeArray m = lat.marginals();
  auto mean = [&](const std::vector<double>& v, std::size_t t) {
    double s = 0.0;
    for (std::size_t x = 0; x < v.size(); ++x)
      if (m[t][x] > 0.0) s += m[t][x] * v[x];
    return s;
  };
  double z = mean(payoff[n], n);
  env.value[n].assign(lat.states[n], z);
  env.stop[n].assign(lat.states[n], 1);
  for (std::size_t t = n; t-- > 0;) {
    double r = 0.0;
    if (running && !running->empty()) r = mean((*running)[t], t);
    const double c = r + z;
    const double X = mean(payoff[t], t);
    const bool stop = X >= c;
    z = stop ? X : c;
    env.continuation[t].assign(lat.states[t], c);
    env.value[t].assign(lat.states[t], z);
    env.stop[t].assign(lat.states[t], stop ? 1 : 0);
  }
  return env;
}

namespace {

double forward_value(const LatticeModel& lat, const EnvelopeEstimate& env, const std::vector<double>& start) {
  const std::size_t n = lat.steps();
  std::vector<double> dist = start, next;
  double acc = 0.0;
  for (std::size_t t = 0; t <= n; ++t) {
    next.assign(t < n ? lat.states[t + 1] : 0, 0.0);
    for (std::size_t x = 0; x < lat.states[t]; ++x) {
      const double w = dist[x];
      if (w == 0.0) continue;
      if (t == n || env.stop[t][x]) {
        acc += w * env.payoff[t][x];
        continue;
      }
      if (!env.running.empty()) acc += w * env.running[t][x];
      for (const auto& tr : lat.kernel[t][x]) next[tr.to] += w * tr.prob;
    }
    dist.swap(next);
  }
  return acc;
}

}  // namespace

StoppingResult optimal_stop(const LatticeModel& lat, const EnvelopeEstimate& env) {
  if (env.mode != EnvelopeMode::Exact) throw InvalidInput("optimal_stop needs an exact envelope");
  StoppingResult res;
  res.stop = env.stop;
  if (lat.information == Information::Full) {
    for (std::size_t x = 0; x < lat.states[0]; ++x) {
      std::vector<double> start(lat.states[0], 0.0);
      start[x] = 1.0;
      res.attained.push_back(forward_value(lat, env, start));
    }
  }
  res.attained_initial = forward_value(lat, env, lat.initial);
  if (lat.information == Information::None) res.attained.assign(lat.states[0], res.attained_initial);
  return res;
}

DoobMeyer doob_meyer(const LatticeModel& lat, const EnvelopeEstimate& env) {
  if (env.mode != EnvelopeMode::Exact) throw InvalidInput("doob_meyer needs an exact envelope");
  const std::size_t n = lat.steps();
  DoobMeyer dm;
  dm.dK.resize(n);
  dm.martingale_drift.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    dm.dK[t].resize(lat.states[t]);
    dm.martingale_drift[t].resize(lat.states[t]);
    for (std::size_t x = 0; x < lat.states[t]; ++x) {
      const double r = env.running.empty() ? 0.0 : env.running[t][x];
      const double ez = lat.expect(env.value, t, x);
      const double dk = env.value[t][x] - (r + ez);
      dm.dK[t][x] = dk;
      // M_t = Z_t + Σ_{s<t} r_s + K_t, so E[M_{t+1} - M_t | x] = E Z_{t+1} - Z_t + r_t + dK_t.
      dm.martingale_drift[t][x] = ez - env.value[t][x] + r + dk;
    }
  }
  return dm;
}

EnvelopeEstimate snell_regression(const RegressionData& data, const Basis& basis, double ridge) {
  if (data.payoff.size() < 2) throw InvalidInput("regression envelope needs at least one step");
  const std::size_t n = data.payoff.size() - 1;
  if (data.features.size() < n) throw InvalidInput("regression envelope needs features for every step");
  const std::size_t N = data.payoff[0].size();
  for (const auto& row : data.payoff)
    if (row.size() != N) throw InvalidInput("payoff samples must cover every path at every step");
  for (double v : data.payoff[n])
    if (!std::isfinite(v)) throw InvalidInput("terminal payoff must be finite");

  EnvelopeEstimate env;
  env.mode = EnvelopeMode::Regression;
  env.payoff = data.payoff;
  env.running = data.running;
  env.value.assign(n + 1, std::vector<double>(N, 0.0));
  env.continuation.assign(n + 1, std::vector<double>(N, 0.0));
  env.stop.assign(n + 1, std::vector<char>(N, 0));
  env.fits.resize(n);
  env.value[n] = data.payoff[n];
  env.stop[n].assign(N, 1);

  Eigen::VectorXd target(static_cast<Eigen::Index>(N));
  std::vector<double> row;
  for (std::size_t t = n; t-- > 0;) {
    const auto& F = data.features[t];
    if (static_cast<std::size_t>(F.rows()) != N) throw InvalidInput("feature rows must match the path count");
    const std::size_t p = basis.size(static_cast<std::size_t>(F.cols()));
    if (N < 10 * p) throw InvalidInput("regression needs at least 10 paths per basis function");
    for (std::size_t i = 0; i < N; ++i) {
      const double r = data.running.empty() ? 0.0 : data.running[t][i];
      target[static_cast<Eigen::Index>(i)] = r + env.value[t + 1][i];
    }
    env.fits[t] = SurfaceFit::fit(F, target, basis, ridge, &env.warnings);
    if (basis.kind == Basis::Kind::Indicator && N < 10 * env.fits[t].parameters())
      throw InvalidInput("regression needs at least 10 paths per indicator cell");
    row.resize(static_cast<std::size_t>(F.cols()));
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t c = 0; c < row.size(); ++c) row[c] = F(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      const double chat = env.fits[t].predict(row);
      env.continuation[t][i] = chat;
      const double X = data.payoff[t][i];
      const bool stop = X >= chat;
      env.stop[t][i] = stop ? 1 : 0;
      env.value[t][i] = stop ? X : target[static_cast<Eigen::Index>(i)];
    }
  }
  double mean = 0.0;
  for (double v : env.value[0]) mean += v;
  mean /= static_cast<double>(N);
  double ss = 0.0;
  for (double v : env.value[0]) ss += (v - mean) * (v - mean);
  env.root_value = mean;
  env.root_stderr = N > 1 ? std::sqrt(ss / static_cast<double>(N - 1) / static_cast<double>(N)) : 0.0;
  return env;
}

nlohmann::json EnvelopeEstimate::to_json() const {
  auto clean = [](const NodeArray& a) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : a) {
      nlohmann::json r = nlohmann::json::array();
      for (double v : row) r.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
      out.push_back(r);
    }
    return out;
  };
  nlohmann::json j;
  if (mode == EnvelopeMode::Exact) {
    j["mode"] = "exact";
    j["value"] = clean(value);
    j["payoff"] = clean(payoff);
    j["stop"] = stop;
  } else {
    j["mode"] = "regression";
    nlohmann::json fs = nlohmann::json::array();
    for (const auto& f : fits) fs.push_back(f.to_json());
    j["fits"] = fs;
    j["root_value"] = root_value;
    j["root_stderr"] = root_stderr;
    j["warnings"] = warnings;
  }
  return j;
}

}  // namespace impulse
