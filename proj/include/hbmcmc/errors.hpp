#pragma once

#include <stdexcept>
#include <string>

namespace hbmcmc {

/// Invalid user input: bad configuration keys, dimension mismatches, bad
/// coefficients. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical routine could not produce a valid result (failed
/// factorization, eigensolver breakdown, line-search failure). Maps to CLI
/// exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hbmcmc
