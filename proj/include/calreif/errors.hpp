#pragma once

#include <stdexcept>
#include <string>

namespace calreif {

// Violated precondition on an operation's inputs (dimension mismatch,
// malformed index tuple, non-orthonormal frame, ...).
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what)
      : std::invalid_argument(what) {}
};

// Input data cannot support the requested computation (e.g. sampling
// resolution too coarse for the finest requested scale).
class ResolutionError : public std::runtime_error {
 public:
  explicit ResolutionError(const std::string& what)
      : std::runtime_error(what) {}
};

// Malformed external input (file parse, unknown config key, bad schema).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace calreif
