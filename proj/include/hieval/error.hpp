#pragma once

#include <stdexcept>
#include <string>

namespace hieval {

/// Bad user input: malformed data files, invalid model configs, unknown names.
/// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model configuration that violates a structural invariant.
class SpecError : public InputError {
 public:
  using InputError::InputError;
};

/// Non-finite values where finite ones are required. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The sampler could not produce usable draws (e.g. every warmup transition diverged).
class SamplerError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace hieval
