#include "impulse/instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "impulse/errors.hpp"
#include "impulse/rng.hpp"

namespace impulse {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void need(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw InvalidInput("instance field '" + field + "': " + what);
}
}  // namespace

double FiniteInstance::discounted_cost(std::size_t b, std::size_t t, std::size_t x) const {
  if (!intervention_allowed[t]) return kInf;
  const double c = cost[b][t][x];
  return std::isfinite(c) ? discount[t] * c : kInf;
}

std::size_t FiniteInstance::node_count() const {
  return std::accumulate(lattice.states.begin(), lattice.states.end(), std::size_t{0});
}

void FiniteInstance::check() const {
  lattice.check();
  const std::size_t n = steps();
  need(times.size() == n + 1, "times", "needs one entry per step");
  for (std::size_t t = 1; t <= n; ++t) need(times[t] > times[t - 1], "times", "must increase");
  need(running.size() == n, "running", "needs one row per step before the last");
  for (std::size_t t = 0; t < n; ++t) need(running[t].size() == states(t), "running", "row size mismatch");
  need(arrival.size() == n + 1, "arrival", "needs one row per step");
  for (std::size_t t = 0; t <= n; ++t) need(arrival[t].size() == states(t), "arrival", "row size mismatch");
  for (const auto& row : running)
    for (double v : row) need(std::isfinite(v), "running", "must be finite");
  for (const auto& row : arrival)
    for (double v : row) need(std::isfinite(v), "arrival", "must be finite");
  need(discount.size() == n + 1, "discount", "needs one entry per step");
  for (double d : discount) need(d > 0.0 && std::isfinite(d), "discount", "must be positive");
  need(!marks.empty(), "marks", "must be nonempty");
  for (std::size_t i = 1; i < marks.size(); ++i) need(mark_less(marks[i - 1], marks[i]), "marks", "must be sorted and distinct");
  need(cost.size() == marks.size(), "cost", "needs one table per mark");
  need(impulse.size() == marks.size(), "impulse", "needs one table per mark");
  for (std::size_t b = 0; b < marks.size(); ++b) {
    need(cost[b].size() == n + 1 && impulse[b].size() == n + 1, "cost/impulse", "needs one row per step");
    for (std::size_t t = 0; t <= n; ++t) {
      need(cost[b][t].size() == states(t) && impulse[b][t].size() == states(t), "cost/impulse", "row size mismatch");
      for (std::size_t x = 0; x < states(t); ++x) {
        const double c = cost[b][t][x];
        need(!std::isnan(c) && c >= 0.0, "cost", "must be nonnegative or unavailable");
        if (std::isfinite(c)) need(c >= delta, "cost", "below the declared floor delta");
        need(impulse[b][t][x] < states(t), "impulse", "target state out of range");
      }
    }
  }
  need(intervention_allowed.size() == n + 1, "intervention_allowed", "needs one entry per step");
  need(delta >= 0.0, "delta", "must be nonnegative");
}

FiniteInstance instance_from_json(const nlohmann::json& j) {
  using nlohmann::json;
  FiniteInstance inst;
  try {
    inst.name = j.value("name", std::string("instance"));
    need(j.contains("kernel"), "kernel", "missing");
    const auto& K = j.at("kernel");
    const std::size_t n = K.size();
    if (j.contains("states")) {
      inst.lattice.states = j.at("states").get<std::vector<std::size_t>>();
    } else {
      need(j.contains("n_states"), "states", "missing (give states or n_states)");
      inst.lattice.states.assign(n + 1, j.at("n_states").get<std::size_t>());
    }
    need(inst.lattice.states.size() == n + 1, "states", "needs one more entry than kernel");
    inst.lattice.kernel.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      for (const auto& row : K[t]) {
        std::vector<Transition> r;
        for (const auto& e : row) r.push_back({e.at(0).get<std::size_t>(), e.at(1).get<double>()});
        inst.lattice.kernel[t].push_back(std::move(r));
      }
    }
    if (j.contains("initial")) {
      inst.lattice.initial = j.at("initial").get<std::vector<double>>();
    } else {
      inst.lattice.initial.assign(inst.lattice.states[0], 0.0);
      if (!inst.lattice.initial.empty()) inst.lattice.initial[0] = 1.0;
    }
    inst.lattice.information = j.value("information", std::string("full")) == "none" ? Information::None : Information::Full;
    if (j.contains("times")) {
      inst.times = j.at("times").get<std::vector<double>>();
    } else {
      inst.times.resize(n + 1);
      for (std::size_t t = 0; t <= n; ++t) inst.times[t] = static_cast<double>(t);
    }
    inst.running = j.at("running").get<NodeArray>();
    inst.arrival = j.at("arrival").get<NodeArray>();
    inst.discount = j.contains("discount") ? j.at("discount").get<std::vector<double>>() : std::vector<double>(n + 1, 1.0);
    for (const auto& m : j.at("marks")) inst.marks.push_back(mark_from_json(m));
    for (const auto& table : j.at("cost")) {
      NodeArray a;
      for (const auto& row : table) {
        std::vector<double> r;
        for (const auto& v : row) r.push_back(v.is_null() ? kInf : v.get<double>());
        a.push_back(std::move(r));
      }
      inst.cost.push_back(std::move(a));
    }
    inst.impulse = j.at("impulse").get<std::vector<std::vector<std::vector<std::size_t>>>>();
    if (j.contains("intervention_allowed")) {
      for (bool b : j.at("intervention_allowed").get<std::vector<bool>>()) inst.intervention_allowed.push_back(b ? 1 : 0);
    } else {
      inst.intervention_allowed.assign(n + 1, 1);
      inst.intervention_allowed[n] = 0;
    }
    inst.k_max = j.value("k_max", std::size_t{1});
    inst.delta = j.value("delta", 0.0);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("instance JSON: ") + e.what());
  }
  inst.check();
  return inst;
}

nlohmann::json to_json(const FiniteInstance& inst) {
  using nlohmann::json;
  json j;
  j["name"] = inst.name;
  j["states"] = inst.lattice.states;
  j["initial"] = inst.lattice.initial;
  j["information"] = inst.lattice.information == Information::None ? "none" : "full";
  json K = json::array();
  for (const auto& step : inst.lattice.kernel) {
    json s = json::array();
    for (const auto& row : step) {
      json r = json::array();
      for (const auto& tr : row) r.push_back(json::array({tr.to, tr.prob}));
      s.push_back(r);
    }
    K.push_back(s);
  }
  j["kernel"] = K;
  j["times"] = inst.times;
  j["running"] = inst.running;
  j["arrival"] = inst.arrival;
  j["discount"] = inst.discount;
  json marks = json::array();
  for (const auto& m : inst.marks) marks.push_back(mark_to_json(m));
  j["marks"] = marks;
  json cost = json::array();
  for (const auto& table : inst.cost) {
    json a = json::array();
    for (const auto& row : table) {
      json r = json::array();
      for (double v : row) r.push_back(std::isfinite(v) ? json(v) : json(nullptr));
      a.push_back(r);
    }
    cost.push_back(a);
  }
  j["cost"] = cost;
  j["impulse"] = inst.impulse;
  std::vector<bool> allowed;
  for (char c : inst.intervention_allowed) allowed.push_back(c != 0);
  j["intervention_allowed"] = allowed;
  j["k_max"] = inst.k_max;
  j["delta"] = inst.delta;
  return j;
}

FiniteInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open instance file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("instance file " + path + ": " + e.what());
  }
  return instance_from_json(j);
}

void save_instance(const FiniteInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write instance file " + path);
  out << to_json(inst).dump(1) << '\n';
}

namespace {

std::vector<Transition> random_row(Rng& rng, std::size_t targets, bool deterministic) {
  if (deterministic || targets == 1) return {{static_cast<std::size_t>(rng.next_u64() % targets), 1.0}};
  const std::size_t k = 1 + rng.next_u64() % std::min<std::size_t>(3, targets);
  std::vector<std::size_t> picks;
  while (picks.size() < k) {
    const std::size_t y = rng.next_u64() % targets;
    if (std::find(picks.begin(), picks.end(), y) == picks.end()) picks.push_back(y);
  }
  std::sort(picks.begin(), picks.end());
  std::vector<double> w(k);
  double s = 0.0;
  for (double& v : w) {
    v = 0.1 + rng.uniform();
    s += v;
  }
  std::vector<Transition> row;
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    // Dyadic-rounded weights keep the row sum exact.
    double p = i + 1 == k ? 1.0 - acc : std::round(w[i] / s * 1024.0) / 1024.0;
    if (p <= 0.0) p = 1.0 / 1024.0;
    if (i + 1 < k && acc + p >= 1.0) p = (1.0 - acc) / 2.0;
    acc += p;
    row.push_back({picks[i], p});
  }
  return row;
}

}  // namespace

LatticeModel random_lattice(std::size_t steps, std::size_t max_states, std::uint64_t seed) {
  Rng rng(seed, 0x1a77);
  LatticeModel lat;
  lat.states.resize(steps + 1);
  for (auto& s : lat.states) s = 1 + rng.next_u64() % max_states;
  lat.kernel.resize(steps);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t x = 0; x < lat.states[t]; ++x) lat.kernel[t].push_back(random_row(rng, lat.states[t + 1], false));
  lat.initial.assign(lat.states[0], 0.0);
  double s = 0.0;
  for (double& p : lat.initial) {
    p = std::round((0.1 + rng.uniform()) * 64.0);
    s += p;
  }
  for (double& p : lat.initial) p /= s;
  double sum = 0.0;
  for (std::size_t x = 0; x + 1 < lat.initial.size(); ++x) sum += lat.initial[x];
  lat.initial.back() = 1.0 - sum;
  return lat;
}

FiniteInstance random_instance(const RandomInstanceSpec& spec, std::uint64_t seed) {
  if (spec.states == 0 || spec.steps == 0 || spec.marks == 0) throw InvalidInput("random instance needs positive sizes");
  Rng rng(seed, 0x1257);
  FiniteInstance inst;
  inst.name = "random-" + std::to_string(seed);
  const std::size_t n = spec.steps, S = spec.states;
  inst.lattice.states.assign(n + 1, S);
  inst.lattice.kernel.resize(n);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t x = 0; x < S; ++x) inst.lattice.kernel[t].push_back(random_row(rng, S, spec.deterministic));
  inst.lattice.initial.assign(S, 0.0);
  inst.lattice.initial[rng.next_u64() % S] = 1.0;
  inst.times.resize(n + 1);
  for (std::size_t t = 0; t <= n; ++t) inst.times[t] = static_cast<double>(t);
  inst.running.assign(n, std::vector<double>(S));
  for (auto& row : inst.running)
    for (double& v : row) v = spec.reward_scale * (2.0 * rng.uniform() - 1.0);
  inst.arrival.assign(n + 1, std::vector<double>(S, 0.0));
  for (double& v : inst.arrival[n]) v = spec.reward_scale * (2.0 * rng.uniform() - 1.0);
  inst.discount.resize(n + 1);
  for (std::size_t t = 0; t <= n; ++t) inst.discount[t] = std::exp(-spec.discount_rate * static_cast<double>(t));
  for (std::size_t b = 0; b < spec.marks; ++b) inst.marks.push_back({static_cast<double>(b)});
  inst.cost.assign(spec.marks, NodeArray(n + 1, std::vector<double>(S)));
  inst.impulse.assign(spec.marks, std::vector<std::vector<std::size_t>>(n + 1, std::vector<std::size_t>(S)));
  for (std::size_t b = 0; b < spec.marks; ++b)
    for (std::size_t t = 0; t <= n; ++t)
      for (std::size_t x = 0; x < S; ++x) {
        if (spec.symmetric_marks && b > 0) {
          inst.cost[b][t][x] = inst.cost[0][t][x];
          inst.impulse[b][t][x] = inst.impulse[0][t][x];
          continue;
        }
        inst.cost[b][t][x] = spec.cost_low + (spec.cost_high - spec.cost_low) * rng.uniform();
        inst.impulse[b][t][x] = rng.next_u64() % S;
      }
  inst.intervention_allowed.assign(n + 1, 1);
  inst.intervention_allowed[n] = 0;
  inst.k_max = spec.k_max;
  inst.delta = spec.cost_low;
  inst.check();
  return inst;
}

}  // namespace impulse
