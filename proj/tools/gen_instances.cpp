// Regenerates the instances shipped under data/instances.
#include <cstdio>
#include <filesystem>
#include <string>

#include "impulse/instance.hpp"

using namespace impulse;

namespace {

/// Two states (untreated, treated); every mark moves 0 -> 1 at cost 1 and the
/// treated state pays 5 at the final step.
FiniteInstance single_step(const std::string& name, std::size_t marks) {
  FiniteInstance inst;
  inst.name = name;
  inst.lattice.states = {2, 2};
  inst.lattice.kernel = {{{{0, 1.0}}, {{1, 1.0}}}};
  inst.lattice.initial = {1.0, 0.0};
  inst.times = {0.0, 1.0};
  inst.running = {{0.0, 0.0}};
  inst.arrival = {{0.0, 0.0}, {0.0, 5.0}};
  inst.discount = {1.0, 1.0};
  for (std::size_t b = 0; b < marks; ++b) {
    inst.marks.push_back({static_cast<double>(b)});
    inst.cost.push_back({{1.0, 1.0}, {1.0, 1.0}});
    inst.impulse.push_back({{1, 1}, {1, 1}});
  }
  inst.intervention_allowed = {1, 0};
  inst.k_max = 1;
  inst.delta = 1.0;
  return inst;
}

FiniteInstance named(FiniteInstance inst, const std::string& name) {
  inst.name = name;
  return inst;
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : std::string(IMPULSE_DATA_DIR) + "/instances";
  std::filesystem::create_directories(dir);
  auto save = [&](const FiniteInstance& inst) {
    save_instance(inst, (dir / (inst.name + ".json")).string());
    std::printf("wrote %s\n", inst.name.c_str());
  };

  RandomInstanceSpec s;
  save(named(random_instance(s, 11), "lattice_a"));
  s.states = 6;
  save(named(random_instance(s, 12), "lattice_b"));
  s.states = 4;
  s.deterministic = true;
  save(named(random_instance(s, 13), "lattice_c"));
  s = {};
  s.symmetric_marks = true;
  save(named(random_instance(s, 14), "lattice_d"));
  s = {};
  s.states = 6;
  s.k_max = 2;
  s.reward_scale = 2.0;
  s.discount_rate = 0.1;
  save(named(random_instance(s, 15), "lattice_e"));
  s = {};
  s.states = 3;
  s.marks = 2;
  s.cost_low = 0.05;
  s.cost_high = 0.3;
  save(named(random_instance(s, 16), "lattice_f"));

  save(single_step("tiny_single_step", 1));
  save(single_step("tiny_symmetric", 2));
  RandomInstanceSpec t;
  t.states = 2;
  t.steps = 3;
  t.marks = 2;
  t.k_max = 2;
  save(named(random_instance(t, 21), "tiny_a"));
  t.states = 3;
  t.steps = 2;
  t.marks = 1;
  save(named(random_instance(t, 22), "tiny_b"));
  t.states = 2;
  t.steps = 3;
  t.marks = 2;
  t.deterministic = true;
  t.cost_low = 0.05;
  t.cost_high = 0.2;
  save(named(random_instance(t, 23), "tiny_c"));
  return 0;
}
