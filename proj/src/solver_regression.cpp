#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "impulse/errors.hpp"
#include "impulse/parallel.hpp"
#include "impulse/reward.hpp"
#include "impulse/rng.hpp"
#include "impulse/sfde.hpp"
#include "impulse/solver.hpp"

namespace impulse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kEtaStream = 0x657461ULL << 32;
constexpr std::uint64_t kRestartStream = 0x7273ULL << 40;
constexpr std::size_t kCacheLimit = 1u << 20;

bool current_only(const FeatureSpec& f) {
  return f.current && !f.running_sup && f.delays.empty() && f.kernel_rates.empty();
}

std::vector<char> decision_mask(const RegressionSetup& s, std::size_t n) {
  std::vector<char> d(n + 1, 0);
  if (s.decision_nodes.empty()) {
    for (std::size_t i = 0; i < n; ++i) d[i] = 1;
  } else {
    for (std::size_t i : s.decision_nodes) {
      if (i >= n) throw InvalidInput("decision node " + std::to_string(i) + " is not before the last node");
      d[i] = 1;
    }
  }
  return d;
}

/// Node index of a sampled η, or n+1 when it falls beyond the grid.
std::size_t eta_node(const DyadicGrid& grid, double eta) {
  if (eta > grid.end() * (1.0 + 1e-12) + 1e-12) return grid.last() + 1;
  return grid.ceil_node(eta);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

RegressionPolicy::RegressionPolicy(const RegressionSetup& setup, const RegressionValues& values)
    : setup_(&setup),
      values_(&values),
      grid_(setup.level, setup.horizon),
      cacheable_(setup.problem->coef.markovian && current_only(setup.features)) {}

double RegressionPolicy::continuation(const PathView& view, std::size_t j) const {
  const std::size_t i = view.node();
  if (i >= grid_.last()) return 0.0;
  j = std::min(j, values_->K);
  const auto f = extract_features(view, setup_->features);
  return values_->continuation[j][i].predict(f);
}

std::pair<double, Mark> RegressionPolicy::obstacle(const PathView& view, std::size_t j) const {
  const std::size_t i = view.node();
  std::pair<double, Mark> best{-kInf, Mark{}};
  if (j == 0 || i >= values_->decision.size() || !values_->decision[i]) return best;
  const auto& P = *setup_->problem;
  for (const auto& b : P.marks.points()) {
    double c;
    try {
      c = cost_at(P, view.time(), view.current(), b);
    } catch (const MarkDomainError&) {
      continue;
    }
    const State post = apply_impulse(P, view, b);
    const double v = -c + value(view.with_current(post), j - 1);
    if (v > best.first) best = {v, b};
  }
  return best;
}

double RegressionPolicy::value(const PathView& view, std::size_t j) const {
  // Surfaces at levels <= j are final once level j+1 is being fitted, so
  // cached values stay valid for the lifetime of the policy.
  CacheKey key;
  if (cacheable_) {
    key = {{view.node(), j}, State(view.current().begin(), view.current().end())};
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const double c = continuation(view, j);
  const double v = j == 0 ? c : std::max(c, obstacle(view, j).first);
  if (cacheable_ && cache_.size() < kCacheLimit) cache_.emplace(std::move(key), v);
  return v;
}

std::optional<Mark> RegressionPolicy::decide(const PathView& view, std::size_t j, std::size_t eta_at) const {
  if (j == 0 || view.node() >= eta_at) return std::nullopt;
  auto [O, b] = obstacle(view, j);
  if (!std::isfinite(O)) return std::nullopt;
  if (O >= continuation(view, j)) return b;
  return std::nullopt;
}

RegressionValues value_iteration_regression(const RegressionSetup& setup) {
  if (!setup.problem) throw InvalidInput("regression setup has no problem");
  if (setup.n_paths == 0) throw InvalidInput("n_paths must be positive");
  if (setup.k_max == 0) throw InvalidInput("k_max must be positive");
  const ProblemSpec& P = *setup.problem;
  const DyadicGrid grid(setup.level, setup.horizon);
  const std::size_t n = grid.last(), N = setup.n_paths;
  const double h = grid.step();
  const bool random = P.horizon.mode == HorizonMode::RandomHorizon;
  const bool observed = random && P.horizon.information == EtaInformation::Observed;

  RegressionValues out;
  out.decision = decision_mask(setup, n);

  // Reward weights for the hidden-η and infinite modes.
  std::vector<double> w_run(n + 1, 1.0), w_arr(n + 1, 0.0);
  if (random && !observed) {
    out.eta_law = eta_pmf(P.horizon, grid, setup.eta_samples, setup.seed ^ kEtaStream);
    double acc = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      w_arr[i] = out.eta_law[i];
      acc += out.eta_law[i];
      w_run[i] = std::max(0.0, 1.0 - acc);
    }
  } else if (!random && P.reward.terminal_at_horizon) {
    w_arr[n] = 1.0;
  }

  // Paths p < N0 start uncontrolled from the initial state. The rest take one
  // random impulse at a random decision node and enter the regressions from
  // there, so the cross-sections also cover the states a controlled process visits.
  std::vector<std::size_t> decision_list;
  for (std::size_t i = 0; i < n; ++i)
    if (out.decision[i]) decision_list.push_back(i);
  const auto& mark_pts = P.marks.points();
  std::size_t N0 = N;
  if (setup.restart_fraction > 0.0 && !decision_list.empty() && !mark_pts.empty())
    N0 = N - static_cast<std::size_t>(std::llround(setup.restart_fraction * static_cast<double>(N)));
  if (N0 < 2) throw InvalidInput("restart_fraction leaves fewer than 2 paths from the initial state");
  Simulator sim(P, grid);
  std::vector<CadlagPath> paths;
  std::vector<std::size_t> start(N, 0);
  paths.reserve(N);
  for (std::size_t p = 0; p < N; ++p) {
    ImpulseControl u;
    if (p >= N0) {
      Rng rng(setup.seed ^ kRestartStream, p);
      start[p] = decision_list[rng.next_u64() % decision_list.size()];
      u = ImpulseControl({{grid.time(start[p]), mark_pts[rng.next_u64() % mark_pts.size()]}});
    }
    paths.push_back(sim.simulate(u, draw_noise(P, grid, setup.seed, p)));
  }
  std::vector<std::size_t> eta_at(N, n + 1);
  if (observed)
    for (std::size_t p = 0; p < N; ++p) {
      Rng rng(setup.seed ^ kEtaStream, p);
      eta_at[p] = eta_node(grid, sample_eta(P.horizon, rng));
    }

  const std::size_t f = setup.features.size(P.dim);
  std::vector<Eigen::MatrixXd> F(n, Eigen::MatrixXd(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(f)));
  NodeArray run(n, std::vector<double>(N, 0.0)), arr(n + 1, std::vector<double>(N, 0.0));
  std::vector<std::vector<char>> active(n + 1, std::vector<char>(N, 1));
  std::vector<double> fv;
  for (std::size_t p = 0; p < N; ++p) {
    for (std::size_t i = 0; i <= n; ++i) {
      const double t = grid.time(i);
      const auto x = paths[p].right(i);
      active[i][p] = (i < eta_at[p] && i >= start[p]) ? 1 : 0;
      if (observed) {
        if (i == eta_at[p] && P.reward.terminal) arr[i][p] = P.disc(t) * P.reward.terminal(t, x);
      } else if (w_arr[i] > 0.0 && P.reward.terminal) {
        arr[i][p] = w_arr[i] * P.disc(t) * P.reward.terminal(t, x);
      }
      if (i == n) break;
      if (active[i][p] && P.reward.running) run[i][p] = w_run[i] * P.disc(t) * P.reward.running(t, x) * h;
      extract_features(node_view(paths[p], i), setup.features, fv);
      for (std::size_t c = 0; c < f; ++c) F[i](static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c)) = fv[c];
    }
  }

  // Domination cap from the spread of uncontrolled rewards.
  {
    double lo = kInf, hi = -kInf;
    for (std::size_t p = 0; p < N0; ++p) {
      double R = arr[0][p];
      for (std::size_t i = 0; i < n; ++i) R += run[i][p] + arr[i + 1][p];
      lo = std::min(lo, R);
      hi = std::max(hi, R);
    }
    double floor = kInf;
    for (std::size_t i = 0; i < n; ++i)
      if (out.decision[i]) floor = std::min(floor, P.disc(grid.time(i)) * P.delta(grid.time(i)));
    out.cap = (std::isfinite(floor) && floor > 0.0) ? static_cast<std::size_t>(std::ceil((hi - lo) / floor)) + 1 : 0;
  }
  const std::size_t K = out.cap > 0 ? std::min(setup.k_max, out.cap) : setup.k_max;

  out.continuation.assign(K + 1, std::vector<SurfaceFit>(n));
  out.K = K;
  RegressionPolicy policy(setup, out);

  std::vector<std::vector<double>> prev_hat(n, std::vector<double>(N, 0.0)), hat(n, std::vector<double>(N, 0.0));
  std::vector<double> V(N), Vn(N);
  Eigen::VectorXd target(static_cast<Eigen::Index>(N));
  for (std::size_t k = 0; k <= K; ++k) {
    out.K = k;  // obstacle recursion reads levels below k only
    std::fill(Vn.begin(), Vn.end(), 0.0);
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t p = 0; p < N; ++p)
        target[static_cast<Eigen::Index>(p)] = active[i][p] ? run[i][p] + arr[i + 1][p] + Vn[p] : 0.0;
      out.continuation[k][i] = SurfaceFit::fit(F[i], target, setup.basis, setup.ridge, &out.warnings, active[i]);
      if (N < 10 * out.continuation[k][i].parameters())
        throw InvalidInput("regression needs at least 10 paths per basis function");
      for (std::size_t p = 0; p < N; ++p) {
        if (!active[i][p]) {
          V[p] = 0.0;
          hat[i][p] = 0.0;
          continue;
        }
        const PathView view = node_view(paths[p], i);
        const double chat = out.continuation[k][i].predict(extract_features(view, setup.features));
        const double O = k > 0 ? policy.obstacle(view, k).first : -kInf;
        const double realized = target[static_cast<Eigen::Index>(p)];
        V[p] = (std::isfinite(O) && O >= chat) ? O : realized;
        hat[i][p] = std::max(chat, O);
      }
      std::swap(V, Vn);
    }
    std::vector<double> root(N0);
    for (std::size_t p = 0; p < N0; ++p) root[p] = arr[0][p] + Vn[p];
    const double m = mean_of(root);
    out.root.push_back(m);
    out.root_stderr.push_back(stderr_of(root, m));
    out.K = k;
    if (k == 0) {
      out.log.push_back({0, 0.0, 0.0});
      std::swap(prev_hat, hat);
      continue;
    }
    double inc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!out.decision[i]) continue;
      double s = 0.0;
      for (std::size_t p = 0; p < N; ++p) s += std::abs(hat[i][p] - prev_hat[i][p]);
      inc = std::max(inc, s / static_cast<double>(N));
    }
    out.log.push_back({k, inc, 0.0});
    const double band = 3.0 * std::hypot(out.root_stderr[k], out.root_stderr[k - 1]);
    if (out.root[k] < out.root[k - 1] - band)
      out.warnings.push_back("Picard iterate decreased by " + std::to_string(out.root[k - 1] - out.root[k]) +
                             " at k=" + std::to_string(k) + " (beyond 3 stderr)");
    std::swap(prev_hat, hat);
    const double tol = setup.tol > 0.0 ? setup.tol : out.root_stderr[k];
    if (inc <= tol) {
      out.converged = true;
      break;
    }
  }
  out.continuation.resize(out.K + 1);
  if (!out.converged && out.cap > 0 && out.K >= out.cap) out.converged = true;
  return out;
}

nlohmann::json RegressionValues::to_json() const {
  nlohmann::json j;
  j["backend"] = "regression-mc";
  j["K"] = K;
  j["cap"] = cap;
  j["converged"] = converged;
  j["root"] = root;
  j["root_stderr"] = root_stderr;
  j["warnings"] = warnings;
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& level : continuation) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& f : level) row.push_back(f.to_json());
    fits.push_back(row);
  }
  j["continuation_fits"] = fits;
  return j;
}

PolicyEvaluation evaluate_policy(const RegressionSetup& setup, const RegressionValues& values, std::size_t n_paths,
                                 std::uint64_t seed) {
  if (n_paths == 0) throw InvalidInput("n_paths must be positive");
  const ProblemSpec& P = *setup.problem;
  const DyadicGrid grid(setup.level, setup.horizon);
  const bool random = P.horizon.mode == HorizonMode::RandomHorizon;
  const bool observed = random && P.horizon.information == EtaInformation::Observed;
  Simulator sim(P, grid);
  RegressionPolicy policy(setup, values);
  std::vector<double> reward(n_paths);
  std::vector<std::size_t> count(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p) {
    std::size_t eta_at = grid.last() + 1;
    if (random) {
      Rng rng(seed ^ kEtaStream, p);
      eta_at = eta_node(grid, sample_eta(P.horizon, rng));
    }
    std::size_t used = 0;
    const std::size_t decide_before = observed ? eta_at : grid.last() + 1;
    FeedbackRule rule = [&](const PathView& view, std::size_t) -> std::optional<Mark> {
      auto b = policy.decide(view, values.K - used, decide_before);
      if (b) ++used;
      return b;
    };
    const CadlagPath path = sim.simulate(rule, draw_noise(P, grid, seed, p));
    std::vector<Intervention> ivs;
    for (const auto& rec : path.impulses()) ivs.push_back({rec.time, rec.mark});
    const ImpulseControl u(std::move(ivs));
    if (random && eta_at <= grid.last()) {
      reward[p] = sample_reward(P, u, path, RewardMode::RandomHorizon, grid.time(eta_at));
    } else {
      reward[p] = sample_reward(P, u, path, RewardMode::Infinite, std::nullopt, grid.end());
    }
    count[p] = used;
  }
  PolicyEvaluation ev;
  ev.n_paths = n_paths;
  ev.mean = mean_of(reward);
  ev.stderr_ = stderr_of(reward, ev.mean);
  ev.histogram.assign(values.K + 1, 0);
  for (std::size_t c : count) ++ev.histogram[std::min(c, values.K)];
  return ev;
}

}  // namespace impulse
