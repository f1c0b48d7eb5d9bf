#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace impulse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

/// The Euler scheme produced a non-finite state.
class SimulationDiverged : public Error {
 public:
  SimulationDiverged(std::size_t step, const std::string& what)
      : Error("simulation diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }
  const char* kind() const noexcept override { return "simulation-diverged"; }

 private:
  std::size_t step_;
};

/// A user-supplied coefficient broke its declared growth or sign contract.
class CoefficientContractError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "coefficient-contract"; }
};

/// A mark was used outside every cost piece / outside U.
class MarkDomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "mark-domain"; }
};

class HorizonSelectionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "horizon-selection"; }
};

/// A numerical invariant that must hold by construction was violated.
class InternalConsistencyError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "internal-consistency"; }
};

/// Oracle or enumeration asked to handle an instance beyond its size cap.
class CapExceeded : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "cap-exceeded"; }
};

/// Malformed configuration, instance file or argument.
class InvalidInput : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid-input"; }
};

}  // namespace impulse
