#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qscf {

// Bad or inconsistent configuration (files, CLI values, parameter ranges
// discovered at load time). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Wire-protocol violation: malformed frame, unexpected type, bad ordering.
// CLI maps this to exit code 3.
class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// A bit source ran out of randomness. Never wraps around silently.
// CLI maps this to exit code 4.
class EntropyExhausted : public std::runtime_error {
 public:
  EntropyExhausted(const std::string& what, std::uint64_t bits_consumed)
      : std::runtime_error(what + " (bits consumed so far: " +
                           std::to_string(bits_consumed) + ")"),
        bits_consumed(bits_consumed) {}

  std::uint64_t bits_consumed;
};

}  // namespace qscf
