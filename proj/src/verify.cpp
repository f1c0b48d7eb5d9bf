#include "impulse/verify.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "impulse/builtin.hpp"
#include "impulse/errors.hpp"
#include "impulse/oracle.hpp"
#include "impulse/rng.hpp"
#include "impulse/snell.hpp"
#include "impulse/solver.hpp"

namespace impulse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

CheckResult fail(std::string name, std::string detail) { return {std::move(name), false, std::move(detail)}; }

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json j;
  j["suite"] = suite;
  j["passed"] = passed();
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : checks) cs.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["checks"] = cs;
  return j;
}

std::vector<FiniteInstance> shipped_instances(const std::string& data_dir, bool tiny) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(data_dir) / "instances";
  if (!fs::is_directory(dir)) throw InvalidInput("instance directory " + dir.string() + " not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    const bool is_tiny = e.path().filename().string().rfind("tiny_", 0) == 0;
    if (is_tiny == tiny) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<FiniteInstance> out;
  for (const auto& f : files) out.push_back(load_instance(f.string()));
  return out;
}

CheckResult check_example(int level_min, int level_max) {
  const std::string name = "example reproduction";
  const double sup = example_supremum();
  double prev = -kInf;
  std::ostringstream detail;
  for (int l = level_min; l <= level_max; ++l) {
    Builtin ex = builtin("example");
    ex.lattice.level = l;
    const RandomHorizonResult res = solve_random_horizon(ex.problem, ex.lattice);
    const double v = res.value, target = example_grid_value(l);
    detail << "l=" << l << " value=" << fmt(v) << " closed=" << fmt(target) << "; ";
    if (std::abs(v - target) > 1e-9) return fail(name, detail.str() + "off the closed form");
    if (!(v > prev)) return fail(name, detail.str() + "not strictly increasing");
    if (!(v < sup)) return fail(name, detail.str() + "reached the supremum");
    if (sup - v > 2.0 * std::ldexp(1.0, -l)) return fail(name, detail.str() + "gap above 2^{1-l}");
    // The policy intervenes once, at the last node before 1.
    const std::size_t want = (std::size_t{1} << l) - 1;
    std::size_t j = res.policy.K, x = 0, count = 0;
    for (std::size_t t = 0; t <= res.instance.steps(); ++t) {
      for (int a; j > 0 && (a = res.policy.act(j, t, x)) >= 0; --j) {
        if (t != want) return fail(name, detail.str() + "intervention at step " + std::to_string(t));
        x = res.instance.impulse[static_cast<std::size_t>(a)][t][x];
        ++count;
      }
      if (t < res.instance.steps()) x = res.instance.lattice.kernel[t][x].front().to;
    }
    if (count != 1) return fail(name, detail.str() + std::to_string(count) + " interventions");
    prev = v;
  }
  detail << "sup=" << fmt(sup);
  return {name, true, detail.str()};
}

CheckResult check_oracle_equivalence(const std::vector<FiniteInstance>& instances) {
  const std::string name = "oracle equivalence";
  if (instances.size() < 5) return fail(name, "fewer than 5 instances");
  double worst = 0.0;
  for (const auto& inst : instances) {
    SolverOptions opt;
    opt.tol = 0.0;
    const LatticeValues lv = value_iteration(inst, opt);
    const LatticePolicy pol = extract_policy(inst, lv);
    const OracleTable bf = brute_force_value(inst, inst.k_max);
    const std::size_t n = inst.steps();
    for (std::size_t j = 0; j <= inst.k_max; ++j) {
      const std::size_t k = std::min(j, lv.K);
      for (std::size_t t = 0; t <= n; ++t)
        for (std::size_t x = 0; x < inst.states(t); ++x) {
          const double d = std::abs(lv.Y[k][t][x] - bf.V[j][t][x]);
          worst = std::max(worst, d);
          if (!(d <= 1e-10))
            return fail(name, inst.name + ": value differs by " + fmt(d) + " at j=" + std::to_string(j) +
                                  " t=" + std::to_string(t) + " x=" + std::to_string(x));
          if (pol.act(j, t, x) != bf.action[j][t][x])
            return fail(name, inst.name + ": action differs at j=" + std::to_string(j) + " t=" + std::to_string(t) +
                                  " x=" + std::to_string(x));
        }
    }
  }
  return {name, true, std::to_string(instances.size()) + " instances, max |diff| " + fmt(worst)};
}

CheckResult check_enumeration(const std::vector<FiniteInstance>& instances) {
  const std::string name = "enumeration cross-check";
  if (instances.empty()) return fail(name, "no tiny instances");
  std::size_t total = 0;
  for (const auto& inst : instances) {
    const std::size_t kmax = std::min<std::size_t>(2, inst.k_max);
    const OracleTable bf = brute_force_value(inst, kmax);
    for (std::size_t k = 0; k <= kmax; ++k) {
      const EnumerationResult en = enumerate_controls_value(inst, k);
      total += en.enumerated;
      if (en.value != bf.root[k])
        return fail(name, inst.name + ": k=" + std::to_string(k) + " enumeration " + fmt(en.value) + " vs DP " +
                              fmt(bf.root[k]));
    }
  }
  return {name, true, std::to_string(instances.size()) + " instances, " + std::to_string(total) + " controls"};
}

CheckResult check_snell_invariants(std::size_t count, std::uint64_t seed) {
  const std::string name = "snell invariants";
  double worst_super = 0.0, worst_attain = 0.0, worst_mart = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const LatticeModel lat = random_lattice(2 + i % 11, 1 + i % 7, seed + i);
    Rng rng(seed + i, 0x5e11);
    const std::size_t n = lat.steps();
    NodeArray X = lat.zeros(), r(n);
    for (std::size_t t = 0; t <= n; ++t)
      for (double& v : X[t]) v = (t < n && rng.uniform() < 0.15) ? -kInf : 2.0 * rng.uniform() - 1.0;
    for (std::size_t t = 0; t < n; ++t) {
      r[t].resize(lat.states[t]);
      for (double& v : r[t]) v = 0.2 * (rng.uniform() - 0.5);
    }
    const std::string tag = "lattice " + std::to_string(i) + ": ";
    const EnvelopeEstimate env = snell_backward(lat, X, &r);
    for (std::size_t t = 0; t <= n; ++t)
      for (std::size_t x = 0; x < lat.states[t]; ++x) {
        if (env.value[t][x] < X[t][x]) return fail(name, tag + "Z below X");
        if (t < n) {
          const double s = env.value[t][x] - (r[t][x] + lat.expect(env.value, t, x));
          worst_super = std::min(worst_super, s);
          if (s < -1e-12) return fail(name, tag + "supermartingale inequality fails by " + fmt(s));
        }
      }
    const StoppingResult st = optimal_stop(lat, env);
    double z0 = 0.0;
    for (std::size_t x = 0; x < lat.states[0]; ++x) z0 += lat.initial[x] * env.value[0][x];
    worst_attain = std::max(worst_attain, std::abs(st.attained_initial - z0));
    if (std::abs(st.attained_initial - z0) > 1e-12) return fail(name, tag + "optimal stop misses Z_0");
    const DoobMeyer dm = doob_meyer(lat, env);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t x = 0; x < lat.states[t]; ++x) {
        if (dm.dK[t][x] < 0.0) return fail(name, tag + "K decreases");
        worst_mart = std::max(worst_mart, std::abs(dm.martingale_drift[t][x]));
        if (std::abs(dm.martingale_drift[t][x]) > 1e-12) return fail(name, tag + "martingale drift");
      }
    // Payoffs X - 2^{-m} increase to X, so the envelopes must increase to Z.
    NodeArray prev;
    for (int m = 1; m <= 8; ++m) {
      NodeArray Xm = X;
      for (auto& row : Xm)
        for (double& v : row) v -= std::ldexp(1.0, -m);
      const NodeArray Zm = snell_backward(lat, Xm, &r).value;
      for (std::size_t t = 0; t <= n; ++t)
        for (std::size_t x = 0; x < lat.states[t]; ++x) {
          if (!prev.empty() && Zm[t][x] < prev[t][x]) return fail(name, tag + "envelopes not monotone in payoff");
          if (Zm[t][x] > env.value[t][x] || env.value[t][x] - Zm[t][x] > std::ldexp(1.0, -m) * (1 + 1e-12))
            return fail(name, tag + "envelopes do not converge to Z");
        }
      prev = Zm;
    }
  }
  return {name, true,
          std::to_string(count) + " lattices, min supermartingale slack " + fmt(worst_super) + ", attain error " +
              fmt(worst_attain) + ", drift " + fmt(worst_mart)};
}

CheckResult check_picard(const std::vector<FiniteInstance>& instances) {
  const std::string name = "picard monotonicity and cap";
  std::size_t max_k = 0;
  for (const auto& base : instances) {
    FiniteInstance inst = base;
    inst.k_max = 0;  // run to the domination cap
    SolverOptions opt;
    opt.tol = 0.0;
    LatticeValues lv;
    try {
      lv = value_iteration(inst, opt);
    } catch (const InternalConsistencyError& e) {
      return fail(name, inst.name + ": " + e.what());
    }
    for (std::size_t k = 1; k <= lv.K; ++k)
      for (std::size_t t = 0; t <= inst.steps(); ++t)
        for (std::size_t x = 0; x < inst.states(t); ++x)
          if (lv.Y[k][t][x] < lv.Y[k - 1][t][x]) return fail(name, inst.name + ": Y decreased");
    if (lv.cap == 0) return fail(name, inst.name + ": no domination cap");
    if (lv.K > lv.cap || !lv.converged)
      return fail(name, inst.name + ": K=" + std::to_string(lv.K) + " cap=" + std::to_string(lv.cap));
    max_k = std::max(max_k, lv.K);
  }
  return {name, true, std::to_string(instances.size()) + " instances, largest K " + std::to_string(max_k)};
}

VerifyReport run_suite(const std::string& suite, const VerifyOptions& opt) {
  VerifyReport rep;
  rep.suite = suite;
  const bool all = suite == "all";
  if (!all && suite != "lattice" && suite != "snell" && suite != "example")
    throw InvalidInput("unknown suite '" + suite + "'");
  if (all || suite == "example") rep.checks.push_back(check_example(opt.example_level_min, opt.example_level_max));
  if (all || suite == "lattice") {
    const auto shipped = shipped_instances(opt.data_dir, false);
    const auto tiny = shipped_instances(opt.data_dir, true);
    rep.checks.push_back(check_oracle_equivalence(shipped));
    rep.checks.push_back(check_enumeration(tiny));
    auto both = shipped;
    both.insert(both.end(), tiny.begin(), tiny.end());
    rep.checks.push_back(check_picard(both));
  }
  if (all || suite == "snell") rep.checks.push_back(check_snell_invariants(opt.snell_lattices, opt.seed));
  return rep;
}

}  // namespace impulse
