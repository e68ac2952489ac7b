#pragma once

#include <stdexcept>
#include <string>

namespace qfl {

/// Caller passed a value outside an operation's contract.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A circuit or gate is malformed for the register it targets.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed external input. `row` / `position` are 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t position = 0)
      : std::runtime_error(what), row_(row), position_(position) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t row_;
  std::size_t position_;
};

/// Invalid experiment or theory configuration; `key` names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace qfl
