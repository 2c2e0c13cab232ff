#pragma once

#include <stdexcept>
#include <string>

namespace reem {

/// Precondition or shape violation by the caller.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared in a forward or backward pass.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationBlowUp : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FittingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; `what()` lists the offending keys.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pipeline stage was run before the artifact it consumes exists.
class PrerequisiteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EndOfStream : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace reem
