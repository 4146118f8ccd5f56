#pragma once

#include <stdexcept>
#include <string>

namespace pagesim {

// Base class for everything the simulator can throw. The CLI maps these to
// exit codes: ConfigError -> 2, all other SimError subclasses -> 3.
class SimError : public std::runtime_error {
 public:
  explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

// A precondition of a model operation was violated. Indicates either a bug in
// calling code or a scenario that drove the model outside its contract.
class ContractViolation : public SimError {
 public:
  explicit ContractViolation(const std::string& what)
      : SimError("contract violation: " + what) {}
};

// Scenario or platform description is invalid (bad parameter, missing file,
// capacity exceeded, unresolved reference).
class ConfigError : public SimError {
 public:
  explicit ConfigError(const std::string& what)
      : SimError("invalid configuration: " + what) {}
};

// Anonymous memory demand cannot be met even after flushing and evicting
// everything the cache is allowed to give up.
class OutOfMemoryError : public SimError {
 public:
  explicit OutOfMemoryError(const std::string& what)
      : SimError("simulated out of memory: " + what) {}
};

// A write loop made no progress two iterations in a row.
class StuckSimulationError : public SimError {
 public:
  explicit StuckSimulationError(const std::string& what)
      : SimError("simulation stuck: " + what) {}
};

// Live processes remain but none has a pending event.
class DeadlockError : public SimError {
 public:
  explicit DeadlockError(const std::string& what)
      : SimError("deadlock: " + what) {}
};

}  // namespace pagesim
