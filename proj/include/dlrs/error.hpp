#pragma once

#include <stdexcept>
#include <string>

namespace dlrs {

/// A NaN or Inf surfaced where a finite value is required (diverged
/// forward pass, overflowing primitive, bad gradient).
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameter; `field` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace dlrs
