#pragma once

#include <stdexcept>
#include <string>

namespace qsel {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or vector shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition (not PSD, out of range, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The inner barrier solver failed to converge or lost feasibility.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration. `field()` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace qsel
