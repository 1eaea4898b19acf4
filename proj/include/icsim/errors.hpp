#pragma once

#include <stdexcept>
#include <string>

namespace icsim {

/// Invalid parameters or an invalid run configuration.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A fit that could not be performed: degenerate data, non-convergence,
/// or an infeasible requirement (e.g. a threshold separation that the
/// fitted classes cannot provide).
class FitError : public std::runtime_error {
public:
  explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file or a failed read/write.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace icsim
