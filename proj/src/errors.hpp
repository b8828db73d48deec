#ifndef VIPER_ERRORS_HPP
#define VIPER_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace viper {

// Thrown for indices or values outside the documented domain of an
// operation (bad state/action ids, dimension mismatches).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown for inconsistent configuration (odd width, K < H, delta out of
// range, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown for malformed file contents; message names the file and where
// parsing stopped.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a numeric procedure fails (divergent training, failed
// factorization).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace viper

#endif
