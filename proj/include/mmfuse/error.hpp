#pragma once

#include <stdexcept>
#include <string>

namespace mmfuse {

// Bad or inconsistent input data (images, manifests, tables, values violating
// an operation's precondition).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or command-line usage.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// An internal invariant was violated; indicates a bug rather than bad input.
class InvariantError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

}  // namespace mmfuse
