#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "impulse/builtin.hpp"
#include "impulse/errors.hpp"
#include "impulse/oracle.hpp"
#include "impulse/reward.hpp"
#include "impulse/sfde.hpp"
#include "impulse/solver.hpp"
#include "impulse/verify.hpp"
#include "json.hpp"

using namespace impulse;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kNumerical = 3, kVerification = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string problem = "example";
  std::string backend = "lattice";
  int level = 0;  // 0: the problem's default
  double horizon = 0.0;
  std::size_t k_max = 0;
  double tol = 0.0;
  std::size_t paths = 0;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string mode;
  unsigned workers = 1;
  std::string suite = "all";
  int degree = 3;
  double ridge = 1e-8;
  std::string control = "[]";
  bool timing = false;
};

json config_json(const RunConfig& c) {
  return {{"command", c.command}, {"problem", c.problem}, {"backend", c.backend}, {"level", c.level},
          {"horizon", c.horizon}, {"kmax", c.k_max},      {"tol", c.tol},         {"paths", c.paths},
          {"seed", c.seed},       {"out", c.out},         {"mode", c.mode},       {"workers", c.workers},
          {"suite", c.suite},     {"degree", c.degree},   {"ridge", c.ridge},     {"control", c.control},
          {"timing", c.timing}};
}

void write_text(const RunConfig& c, const std::string& file, const std::string& text) {
  std::filesystem::create_directories(c.out);
  std::ofstream os(std::filesystem::path(c.out) / file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + file + " in " + c.out);
  os << text;
}

void write_json(const RunConfig& c, const std::string& file, const json& j) { write_text(c, file, j.dump(2) + "\n"); }

void write_convergence(const RunConfig& c, const std::vector<ConvergenceRow>& log) {
  std::ostringstream os;
  os << "k,sup_increment,wall_time\n";
  char buf[96];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.6f\n", r.k, r.sup_increment, r.wall_time);
    os << buf;
  }
  write_text(c, "convergence.csv", os.str());
}

bool is_lattice_file(const std::string& p) { return p.rfind("lattice:", 0) == 0; }

/// The named problem with the config's overrides applied, and the effective
/// level and horizon written back into the config.
Builtin resolve(RunConfig& c) {
  Builtin b = builtin(c.problem);
  if (c.level == 0) c.level = b.lattice.level;
  if (c.horizon == 0.0) c.horizon = b.lattice.horizon;
  if (!(c.horizon > 0.0)) throw UsageError("horizon must be positive");
  b.lattice.level = c.level;
  b.lattice.horizon = c.horizon;
  b.problem.horizon.T = c.horizon;
  if (c.k_max) b.lattice.k_max = c.k_max;
  if (c.mode.empty()) {
    c.mode = b.problem.horizon.mode == HorizonMode::RandomHorizon ? "random-horizon" : "infinite";
  } else if (c.mode == "infinite") {
    b.problem.horizon.mode = HorizonMode::Infinite;
  } else if (c.mode == "random-horizon") {
    if (b.problem.horizon.eta_atoms.empty() && !b.problem.horizon.eta_sampler)
      throw UsageError("mode: problem '" + c.problem + "' has no law for the random horizon");
    b.problem.horizon.mode = HorizonMode::RandomHorizon;
  } else {
    throw UsageError("mode must be infinite or random-horizon");
  }
  return b;
}

struct LatticeRun {
  FiniteInstance inst;
  LatticeValues values;
  LatticePolicy policy;
};

LatticeRun solve_lattice(RunConfig& c) {
  LatticeRun r;
  SolverOptions opt;
  if (c.tol == 0.0) c.tol = 1e-6;
  opt.tol = c.tol;
  opt.k_max = c.k_max;
  opt.timing = c.timing;
  if (is_lattice_file(c.problem)) {
    r.inst = load_instance(c.problem.substr(8));
    if (c.mode.empty()) c.mode = "infinite";
  } else {
    Builtin b = resolve(c);
    if (b.problem.horizon.mode == HorizonMode::RandomHorizon) {
      RandomHorizonResult res = solve_random_horizon(b.problem, b.lattice, opt);
      r.inst = std::move(res.instance);
      r.values = std::move(res.values);
      r.policy = std::move(res.policy);
      return r;
    }
    r.inst = build_lattice(b.problem, b.lattice);
  }
  r.values = value_iteration(r.inst, opt);
  r.policy = extract_policy(r.inst, r.values);
  return r;
}

struct RegressionRun {
  Builtin b;
  RegressionSetup setup;
  RegressionValues values;
};

RegressionRun solve_regression(RunConfig& c) {
  if (is_lattice_file(c.problem)) throw UsageError("backend: regression needs a built-in problem");
  RegressionRun r;
  r.b = resolve(c);
  if (c.paths == 0) c.paths = 100000;
  r.setup.problem = &r.b.problem;
  r.setup.level = c.level;
  r.setup.horizon = c.horizon;
  r.setup.decision_nodes = r.b.decisions;
  r.setup.basis = {Basis::Kind::Polynomial, c.degree};
  r.setup.n_paths = c.paths;
  r.setup.seed = c.seed;
  r.setup.ridge = c.ridge;
  r.setup.workers = c.workers;
  if (c.k_max) r.setup.k_max = c.k_max;
  c.k_max = r.setup.k_max;
  r.setup.tol = c.tol;
  r.values = value_iteration_regression(r.setup);
  return r;
}

/// Decision table of a regression policy on evenly spaced states.
json tabulate(const RegressionRun& r) {
  const RegressionPolicy pol(r.setup, r.values);
  const DyadicGrid grid(r.setup.level, r.setup.horizon);
  const auto& L = r.b.lattice;
  json marks = json::array(), table = json::array();
  std::vector<double> xs;
  const double lo = L.points.empty() ? L.x_min : L.points.front();
  const double hi = L.points.empty() ? L.x_max : L.points.back();
  for (int i = 0; i <= 40; ++i) xs.push_back(lo + (hi - lo) * i / 40.0);
  CadlagPath scratch(grid, 1, r.b.problem.history);
  for (std::size_t j = 0; j <= r.values.K; ++j) {
    json level = json::array();
    for (std::size_t t = 0; t < grid.last(); ++t) {
      json row = json::array();
      for (double x : xs) {
        const PathView v(scratch, t, std::span<const double>(&x, 1));
        const auto b = pol.decide(v, j, grid.last() + 1);
        row.push_back(b ? mark_to_json(*b) : json(nullptr));
      }
      level.push_back(row);
    }
    table.push_back(level);
  }
  return {{"backend", "regression-mc"}, {"K", r.values.K}, {"states", xs}, {"action", table},
          {"rule", "intervene iff max_b {-c + Y^{j-1}(post)} >= C^j; null = continue"}};
}

int cmd_solve(RunConfig& c, bool evaluate) {
  json report;
  if (c.backend == "lattice") {
    LatticeRun r = solve_lattice(c);
    write_json(c, "values.json", r.values.to_json());
    write_json(c, "policy.json", r.policy.to_json());
    write_convergence(c, r.values.log);
    report["instance"] = r.inst.name;
    report["nodes"] = r.inst.node_count();
    report["value"] = r.values.root.back();
    report["K"] = r.values.K;
    report["cap"] = r.values.cap;
    report["converged"] = r.values.converged;
    report["policy_value_exact"] = evaluate_policy_exact(r.inst, r.policy);
    if (evaluate) {
      if (c.paths == 0) c.paths = 100000;
      report["evaluation"] = evaluate_policy(r.inst, r.policy, c.paths, c.seed, c.workers).to_json();
    }
    std::printf("value %.12f (K=%zu, converged=%s)\n", r.values.root.back(), r.values.K,
                r.values.converged ? "yes" : "no");
  } else if (c.backend == "regression") {
    RegressionRun r = solve_regression(c);
    write_json(c, "values.json", r.values.to_json());
    write_json(c, "policy.json", tabulate(r));
    write_convergence(c, r.values.log);
    const PolicyEvaluation ev = evaluate_policy(r.setup, r.values, c.paths, c.seed + 1);
    report["in_sample_value"] = r.values.root.back();
    report["in_sample_stderr"] = r.values.root_stderr.back();
    report["value"] = ev.mean;
    report["stderr"] = ev.stderr_;
    report["evaluation"] = ev.to_json();
    report["K"] = r.values.K;
    report["cap"] = r.values.cap;
    report["converged"] = r.values.converged;
    report["warnings"] = r.values.warnings;
    std::printf("value %.6f +- %.6f (in-sample %.6f, K=%zu)\n", ev.mean, ev.stderr_, r.values.root.back(),
                r.values.K);
  } else {
    throw UsageError("backend must be lattice or regression");
  }
  report["config"] = config_json(c);
  write_json(c, "report.json", report);
  return kOk;
}

int cmd_simulate(RunConfig& c) {
  if (is_lattice_file(c.problem)) throw UsageError("problem: simulate needs a built-in problem");
  Builtin b = resolve(c);
  if (c.paths == 0) c.paths = 1;
  ImpulseControl u;
  try {
    u = control_from_json(json::parse(c.control));
  } catch (const json::exception& e) {
    throw UsageError(std::string("control: ") + e.what());
  }
  if (auto bad = validate(u, b.problem.marks)) throw UsageError("control: " + *bad);
  const ProblemSpec& P = b.problem;
  const DyadicGrid grid(c.level, c.horizon);
  u = snap_to_grid(u, grid);  // off-grid times move up to the next node
  Simulator sim(P, grid);
  const bool random = P.horizon.mode == HorizonMode::RandomHorizon;
  std::vector<double> rewards;
  for (std::size_t p = 0; p < c.paths; ++p) {
    const CadlagPath path = sim.simulate(u, c.seed, p);
    if (p == 0) {
      std::ostringstream os;
      write_csv(os, path);
      write_text(c, "path.csv", os.str());
    }
    if (random) {
      Rng rng(c.seed ^ 0x657461ULL, p);
      const double eta = sample_eta(P.horizon, rng);
      rewards.push_back(eta <= grid.end() ? sample_reward(P, u, path, RewardMode::RandomHorizon, eta)
                                          : sample_reward(P, u, path, RewardMode::Infinite));
    } else {
      rewards.push_back(sample_reward(P, u, path, RewardMode::Infinite));
    }
  }
  double mean = 0.0, ss = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double se = rewards.size() > 1 ? std::sqrt(ss / static_cast<double>(rewards.size() - 1) /
                                                   static_cast<double>(rewards.size()))
                                       : 0.0;
  json report{{"reward_mean", mean}, {"reward_stderr", se}, {"paths", c.paths}, {"control", to_json(u)}};
  report["config"] = config_json(c);
  write_json(c, "report.json", report);
  std::printf("reward %.6f +- %.6f over %zu paths\n", mean, se, c.paths);
  return kOk;
}

int cmd_example(RunConfig& c) {
  c.problem = "example";
  c.backend = "lattice";
  if (c.level == 0) c.level = 7;
  LatticeRun r = solve_lattice(c);
  const double v = r.values.root.back();
  write_json(c, "values.json", r.values.to_json());
  write_json(c, "policy.json", r.policy.to_json());
  write_convergence(c, r.values.log);
  json report{{"value", v},
              {"closed_form", example_grid_value(c.level)},
              {"supremum", example_supremum()},
              {"gap", example_supremum() - v},
              {"K", r.values.K},
              {"config", config_json(c)}};
  write_json(c, "report.json", report);
  std::printf("level %d: value %.12f (closed form %.12f), supremum 0.5(e-1) = %.9f is not attained\n", c.level, v,
              example_grid_value(c.level), example_supremum());
  return kOk;
}

int cmd_verify(RunConfig& c) {
  const VerifyReport rep = run_suite(c.suite);
  json j = rep.to_json();
  j["config"] = config_json(c);
  write_json(c, "report.json", j);
  for (const auto& ch : rep.checks)
    std::printf("%s %s: %s\n", ch.passed ? "PASS" : "FAIL", ch.name.c_str(), ch.detail.c_str());
  return rep.passed() ? kOk : kVerification;
}

void emit_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic impulse control solver"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value configuration file");
  RunConfig c;
  app.add_option("--problem", c.problem, "built-in problem name or lattice:<instance.json>");
  app.add_option("--backend", c.backend, "lattice | regression");
  app.add_option("--level", c.level, "dyadic grid level l in [1, 14]");
  app.add_option("--horizon", c.horizon, "grid horizon T");
  app.add_option("--kmax", c.k_max, "maximum number of interventions (0: instance or cap)");
  app.add_option("--tol", c.tol, "convergence tolerance on the sup-increment (0: backend default)");
  app.add_option("--paths", c.paths, "Monte Carlo paths (0: command default)");
  app.add_option("--seed", c.seed, "random seed");
  app.add_option("--out", c.out, "output directory");
  app.add_option("--mode", c.mode, "infinite | random-horizon (default: the problem's)");
  app.add_option("--workers", c.workers, "worker threads");
  app.add_option("--suite", c.suite, "verify suite: lattice | snell | example | all");
  app.add_option("--degree", c.degree, "polynomial basis degree");
  app.add_option("--ridge", c.ridge, "ridge penalty of the regressions");
  app.add_option("--control", c.control, "open-loop control as JSON [{\"t\":..,\"b\":..}]");
  app.add_flag("--timing", c.timing, "record wall times (output no longer byte-identical)");
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "simulate paths under an open-loop control"},
      {"solve", "Picard iteration to the value function and policy"},
      {"policy-eval", "solve, then evaluate the policy forward on fresh paths"},
      {"verify", "run the oracle and invariant suites"},
      {"example", "the two-point random-horizon Example at one grid level"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return kUsage;
  }
  c.command = app.get_subcommands().front()->get_name();

  try {
    if (c.level != 0 && (c.level < 1 || c.level > 14)) throw UsageError("level out of range");
    if (c.workers == 0) throw UsageError("workers must be positive");
    if (c.command == "simulate") return cmd_simulate(c);
    if (c.command == "solve") return cmd_solve(c, false);
    if (c.command == "policy-eval") return cmd_solve(c, true);
    if (c.command == "verify") return cmd_verify(c);
    return cmd_example(c);
  } catch (const UsageError& e) {
    emit_error("usage", e.what());
    return kUsage;
  } catch (const InvalidInput& e) {
    emit_error(e.kind(), e.what());
    return kUsage;
  } catch (const Error& e) {
    emit_error(e.kind(), e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return kNumerical;
  }
}
