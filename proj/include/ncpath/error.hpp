#pragma once

#include <stdexcept>
#include <string>

namespace ncpath {

/// Invalid user-supplied configuration (bad penalty parameters, empty grids,
/// infeasible schedules, missing files). Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Vector/matrix shapes that do not agree.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure inside a solver (diverged line search, singular system).
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ncpath
