#pragma once

#include <stdexcept>
#include <string>

namespace torsim {

/// Argument outside the mathematical domain of a model function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// No operating point could be found for the requested mean wind speed.
class EquilibriumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Controller synthesis failed (rank test, Riccati divergence, ...).
class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or incomplete configuration. `key()` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what),
        key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// File could not be read or written, or its contents did not parse.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A preview request ran past the end of the wind record.
class EndOfDataError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace torsim
