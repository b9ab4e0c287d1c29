#pragma once

#include <stdexcept>
#include <string>

namespace cfmimo {

/// Argument outside the mathematical domain of a function (negative power,
/// nonpositive distance, probability outside (0,1), ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A well-posed request that has no solution, e.g. a rate target that no
/// SINR can reach.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid scenario: bad config values, or antenna counts that the chosen
/// precoder cannot support.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// The GP solver returned a non-optimal status inside an iterative method.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

}  // namespace cfmimo
