#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mildheat {

/// Invalid argument to a numerical routine (violated precondition).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced non-finite or runaway values.
class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& what, std::size_t step = npos)
      : std::runtime_error(what), step_(step) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  /// Offending time step, or npos when the failure is not tied to one.
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A study finished but its sample does not support a verdict.
class InconclusiveStudy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ConfigErrorKind { unknown_key, missing_key, out_of_range, malformed_value, unknown_command };

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(ConfigErrorKind kind, std::string key, const std::string& what)
      : std::invalid_argument(what), kind_(kind), key_(std::move(key)) {}

  ConfigErrorKind kind() const noexcept { return kind_; }
  const std::string& key() const noexcept { return key_; }

 private:
  ConfigErrorKind kind_;
  std::string key_;
};

}  // namespace mildheat
