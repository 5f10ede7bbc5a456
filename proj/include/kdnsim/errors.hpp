#pragma once

#include <stdexcept>
#include <string>

namespace kdnsim {

/// Base class for all errors raised by the simulator library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric argument is outside its domain (non-finite, non-positive, ...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Network state references something that does not exist.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class InvalidTelemetry : public Error {
 public:
  using Error::Error;
};

/// A persisted Q-table does not match the expected layout.
class IncompatibleTable : public Error {
 public:
  using Error::Error;
};

/// Malformed file or frame contents.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Scenario file problems: unknown key, bad type, violated constraint.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, int line, const std::string& what)
      : Error(format(key, line, what)), key_(key), line_(line) {}

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& key, int line,
                            const std::string& what) {
    std::string msg;
    if (line > 0) msg += "line " + std::to_string(line) + ": ";
    if (!key.empty()) msg += "'" + key + "': ";
    return msg + what;
  }

  std::string key_;
  int line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Violation of the env-bridge wire protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace kdnsim
