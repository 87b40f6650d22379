#pragma once

#include <stdexcept>
#include <string>

namespace zsc {

// Bad user input: malformed config, out-of-range parameters, broken dataset
// files. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failure during execution (numerical breakdown, I/O, exhausted retries).
// The CLI maps this to exit code 1.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace zsc
