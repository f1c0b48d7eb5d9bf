#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "impulse/instance.hpp"
#include "json.hpp"

namespace impulse {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const;
  nlohmann::json to_json() const;
};

struct VerifyOptions {
  std::string data_dir = IMPULSE_DATA_DIR;
  std::size_t snell_lattices = 100;
  std::uint64_t seed = 2024;
  int example_level_min = 4;
  int example_level_max = 9;
};

/// Shipped instances, sorted by file name; "tiny_*" files are the ones small
/// enough for control enumeration.
std::vector<FiniteInstance> shipped_instances(const std::string& data_dir, bool tiny);

/// Example solves at each level match the closed form to 1e-9, increase
/// strictly, stay below the supremum and close the gap at rate 2 * 2^{-l}.
CheckResult check_example(int level_min, int level_max);
/// Solver values and policies against the brute-force DP.
CheckResult check_oracle_equivalence(const std::vector<FiniteInstance>& instances);
/// Enumeration against the brute-force DP for k = 0, 1, 2.
CheckResult check_enumeration(const std::vector<FiniteInstance>& instances);
/// Envelope invariants on randomized lattices.
CheckResult check_snell_invariants(std::size_t count, std::uint64_t seed);
/// Nodewise monotonicity in k and termination within the domination cap.
CheckResult check_picard(const std::vector<FiniteInstance>& instances);

/// Suites: lattice, snell, example, all. Throws InvalidInput on other names.
VerifyReport run_suite(const std::string& suite, const VerifyOptions& opt = {});

}  // namespace impulse
