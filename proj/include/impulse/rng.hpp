#pragma once

// Random streams used throughout the library.
//
// Algorithm (fixed for this release): each stream is a std::mt19937_64 whose
// seed is SplitMix64(seed) xor SplitMix64(stream + 0x9E3779B97F4A7C15).
// Uniforms take the top 53 bits; normals use the Marsaglia polar method;
// Poisson counts use Knuth's product method. None of these depend on
// implementation-defined <random> distributions, so streams are reproducible
// across standard libraries.

#include <cstdint>
#include <random>

namespace impulse {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Uniform on [0, 1).
  double uniform() noexcept;
  /// Uniform on (0, 1).
  double uniform_open() noexcept;
  double normal() noexcept;
  std::uint64_t poisson(double mean) noexcept;
  std::uint64_t next_u64() noexcept { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace impulse
