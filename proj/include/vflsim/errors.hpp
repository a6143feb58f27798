#pragma once

#include <stdexcept>
#include <string>

namespace vflsim {

/// Bad configuration or bad input data (dimension mismatch, unknown key,
/// malformed file). Maps to CLI exit code 1.
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// API misuse: out-of-order protocol calls, mismatched tapes, wrong
/// vector lengths handed to an otherwise valid object.
struct usage_error : std::logic_error {
  using std::logic_error::logic_error;
};

/// Non-finite value produced at runtime. Maps to CLI exit code 2.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vflsim
