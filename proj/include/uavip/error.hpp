#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uavip {

// Invalid configuration, shapes, or arguments. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries the 1-based line (or byte offset for binary files).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t location)
      : std::runtime_error(what), location_(location) {}
  std::size_t location() const noexcept { return location_; }

 private:
  std::size_t location_;
};

// NaN/Inf produced during a computation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every query is masked or already asked.
class NoAvailableQuery : public std::runtime_error {
 public:
  NoAvailableQuery() : std::runtime_error("no available query: every logit is masked") {}
};

}  // namespace uavip
