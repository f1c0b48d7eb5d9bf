// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "impulse/builtin.hpp"
#include "impulse/errors.hpp"
#include "impulse/oracle.hpp"
#include "impulse/reward.hpp"
#include "impulse/sfde.hpp"
#include "impulse/solver.hpp"
#include "impulse/verify.hpp"

using namespace impulse;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome criterion_example() {
  std::string detail;
  double worst_time = 0.0;
  for (int l = 4; l <= 9; ++l) {
    const auto t0 = Clock::now();
    const CheckResult r = check_example(l, l);
    worst_time = std::max(worst_time, seconds_since(t0));
    if (!r.passed) return {false, r.detail};
  }
  const CheckResult all = check_example(4, 9);
  if (!all.passed) return {false, all.detail};
  if (worst_time >= 1.0) return {false, "slowest level took " + num(worst_time) + " s"};
  return {true, "levels 4..9 within 1e-9 of 0.5(1+e) - e^{2^-l}, increasing, below 0.5(e-1); slowest level " +
                    num(worst_time, 3) + " s"};
}

Outcome criterion_oracle() {
  const auto t0 = Clock::now();
  const CheckResult r = check_oracle_equivalence(shipped_instances(IMPULSE_DATA_DIR, false));
  const double s = seconds_since(t0);
  if (!r.passed) return {false, r.detail};
  if (s >= 5.0) return {false, "took " + num(s) + " s"};
  return {true, r.detail + ", " + num(s, 3) + " s"};
}

Outcome criterion_enumeration() {
  const CheckResult r = check_enumeration(shipped_instances(IMPULSE_DATA_DIR, true));
  return {r.passed, r.detail};
}

Outcome criterion_snell() {
  const CheckResult r = check_snell_invariants(100, 2024);
  return {r.passed, r.detail};
}

Outcome criterion_picard(const RegressionValues& reg) {
  auto insts = shipped_instances(IMPULSE_DATA_DIR, false);
  const auto tiny = shipped_instances(IMPULSE_DATA_DIR, true);
  insts.insert(insts.end(), tiny.begin(), tiny.end());
  for (std::uint64_t seed = 100; seed < 120; ++seed) insts.push_back(random_instance({}, seed));
  const CheckResult r = check_picard(insts);
  if (!r.passed) return {false, r.detail};
  for (std::size_t k = 1; k < reg.root.size(); ++k) {
    const double band = 3.0 * std::hypot(reg.root_stderr[k], reg.root_stderr[k - 1]);
    if (reg.root[k] < reg.root[k - 1] - band)
      return {false, "regression iterate dropped by " + num(reg.root[k - 1] - reg.root[k]) + " at k=" +
                         std::to_string(k)};
  }
  if (reg.cap == 0 || reg.K > reg.cap) return {false, "regression K beyond the cap"};
  return {true, r.detail + "; regression roots monotone within 3 stderr up to K=" + std::to_string(reg.K)};
}

struct RegressionRun {
  Builtin b;
  RegressionSetup setup;
  RegressionValues values;
  PolicyEvaluation eval;
  double lattice = 0.0;
  double seconds = 0.0;
};

RegressionRun run_regression() {
  RegressionRun r;
  const auto t0 = Clock::now();
  r.b = builtin("gbm-reset");
  r.setup.problem = &r.b.problem;
  r.setup.level = 3;
  r.setup.horizon = 1.0;
  r.setup.basis = {Basis::Kind::Polynomial, 3};
  r.setup.n_paths = 100000;
  r.setup.seed = 1;
  r.values = value_iteration_regression(r.setup);
  r.eval = evaluate_policy(r.setup, r.values, 100000, 2);
  r.seconds = seconds_since(t0);
  const FiniteInstance inst = build_lattice(r.b.problem, r.b.lattice);
  r.lattice = value_iteration(inst).root.back();
  return r;
}

Outcome criterion_regression(const RegressionRun& r) {
  const double se = r.eval.stderr_;  // the lattice value carries no sampling error
  const double gap = r.eval.mean - r.lattice;
  std::string d = "regression " + num(r.eval.mean, 7) + " +- " + num(se, 3) + " vs lattice " + num(r.lattice, 7) +
                  " (" + num(gap / se, 3) + " se), " + num(r.seconds, 3) + " s";
  const bool ok = std::abs(gap) <= 3.0 * se && se < 0.01 * std::abs(r.eval.mean) && r.seconds < 60.0;
  return {ok, d};
}

Outcome criterion_flow() {
  const Builtin b = builtin("gbm-flow");
  const DyadicGrid grid(10, 1.0);
  std::vector<std::pair<double, double>> dts, dbs;
  for (int k = 4; k <= 8; ++k) {
    dts.push_back({std::ldexp(1.0, -k), 0.0});
    dbs.push_back({0.0, std::ldexp(1.0, -k)});
  }
  const FlowTable ft = flow_perturbation_test(b.problem, {}, {}, 0.25, {1.0}, dts, grid, 4000, 7, 4);
  const FlowTable fb = flow_perturbation_test(b.problem, {}, {}, 0.25, {1.0}, dbs, grid, 4000, 7, 4);
  const bool ok = ft.exponent == 4.0 && ft.slope >= 1.6 && std::abs(fb.slope - 4.0) < 1e-9;
  return {ok, "time slope " + num(ft.slope, 4) + " (>= 1.6), reset slope " + num(fb.slope, 12)};
}

Outcome criterion_tail() {
  const Builtin b = builtin("ou-discounted");
  const double eps = b.problem.reward.epsilon;
  AdmissibilityOptions opt;
  opt.n_paths = 2000;
  opt.level = 4;
  opt.workers = 4;
  const AdmissibilityReport rep = admissibility_report(b.problem, opt);

  const FiniteInstance inst = build_lattice(b.problem, b.lattice);
  SolverOptions so;
  so.tol = 0.0;
  const LatticeValues lv = value_iteration(inst, so);
  std::vector<double> Ts, sups;
  for (double Tp = 1.0; Tp <= 6.0; Tp += 1.0) {
    double s = 0.0;
    for (std::size_t t = 0; t <= inst.steps(); ++t) {
      if (inst.times[t] < Tp) continue;
      for (std::size_t x = 0; x < inst.states(t); ++x) s = std::max(s, std::abs(lv.Y[lv.K][t][x] - lv.Y[0][t][x]));
    }
    Ts.push_back(Tp);
    sups.push_back(s);
  }
  const TailFit node_fit = fit_exponential(Ts, sups);
  const bool ok = rep.running_fit.rate >= 0.9 * eps && node_fit.rate >= 0.9 * eps && sups.front() > 0.0;
  return {ok, "reward tail rate " + num(rep.running_fit.rate, 4) + ", node tail rate " + num(node_fit.rate, 4) +
                  " (need >= " + num(0.9 * eps, 3) + ")"};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Outcome criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / "impulse-determinism";
  fs::remove_all(root);
  const std::vector<std::string> runs = {
      "solve --problem gbm-reset --backend regression --paths 20000 --seed 5 --workers 2",
      "policy-eval --problem lattice:" + std::string(IMPULSE_DATA_DIR) + "/instances/lattice_a.json --paths 20000 "
      "--seed 9 --workers 3",
      "simulate --problem merton --level 8 --paths 200 --seed 3 --control '[{\"t\":0.5,\"b\":1}]'",
      "example --level 6",
  };
  std::size_t files = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    // Both runs write to the same directory (it is recorded in report.json).
    const fs::path out = root / "run", a = root / (std::to_string(i) + "_0"), b = root / (std::to_string(i) + "_1");
    for (const fs::path& keep : {a, b}) {
      const std::string cmd = std::string("\"") + IMPULSE_CLI + "\" " + runs[i] + " --out \"" + out.string() +
                              "\" > /dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + runs[i]};
      fs::rename(out, keep);
    }
    for (const auto& e : fs::directory_iterator(a)) {
      const fs::path other = b / e.path().filename();
      if (!fs::exists(other) || slurp(e.path()) != slurp(other))
        return {false, e.path().filename().string() + " differs for: " + runs[i]};
      ++files;
    }
  }
  fs::remove_all(root);
  return {true, std::to_string(runs.size()) + " commands run twice, " + std::to_string(files) +
                    " artifacts byte-identical"};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] criterion %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };

  RegressionRun reg;
  bool have_reg = false;
  auto regression = [&]() -> const RegressionRun& {
    if (!have_reg) {
      reg = run_regression();
      have_reg = true;
    }
    return reg;
  };

  report(1, "example reproduction", criterion_example);
  report(2, "oracle equivalence", criterion_oracle);
  report(3, "enumeration cross-check", criterion_enumeration);
  report(4, "snell invariants", criterion_snell);
  report(5, "picard monotonicity and cap", [&] { return criterion_picard(regression().values); });
  report(6, "regression vs lattice", [&] { return criterion_regression(regression()); });
  report(7, "flow continuity rate", criterion_flow);
  report(8, "tail decay", criterion_tail);
  report(9, "determinism", criterion_determinism);
  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
