#pragma once

#include <stdexcept>
#include <string>

namespace igdtm {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// File-format or filesystem failure; the message names the offending path.
class IoError : public Error {
public:
  using Error::Error;
};

/// Bad configuration value; the message names the offending key.
class ConfigError : public Error {
public:
  ConfigError(std::string key, const std::string& what)
      : Error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

/// Loss of positive definiteness or a non-finite quantity during inference.
class NumericError : public Error {
public:
  using Error::Error;
};

}  // namespace igdtm
