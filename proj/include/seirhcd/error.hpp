#pragma once

#include <stdexcept>
#include <string>

namespace seirhcd {

/// Malformed or inconsistent user input (scenario files, flags, bounds).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A computation produced non-finite values or could not proceed.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Explicit time step exceeds the stability bound of the scheme.
class StabilityError : public NumericalError {
public:
  StabilityError(const std::string& what, long suggested_nt)
      : NumericalError(what), suggested_nt_(suggested_nt) {}
  long suggested_nt() const noexcept { return suggested_nt_; }

private:
  long suggested_nt_;
};

}  // namespace seirhcd
