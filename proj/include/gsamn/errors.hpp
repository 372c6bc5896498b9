#pragma once

#include <stdexcept>
#include <string>

namespace gsamn {

// Base class for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or axis disagreement between operands.
struct DimensionError : Error {
  using Error::Error;
};

// An operation was called outside its contract (non-scalar loss,
// step out of range, scalar access on a non-scalar, ...).
struct ContractError : Error {
  using Error::Error;
};

// A tensor was expected on a tape but is not recorded there.
struct MissingNodeError : Error {
  using Error::Error;
};

// softmax / attention over an empty or fully masked candidate set.
struct EmptySupportError : Error {
  using Error::Error;
};

// Nothing to encode (empty question and answer) or an empty memory.
struct EmptyInputError : Error {
  using Error::Error;
};

// Bad run configuration: unknown keys, inconsistent dimensions.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input data; the message carries file and line when known.
struct DataError : Error {
  using Error::Error;
};

// NaN or other numeric breakdown during training.
struct NumericError : Error {
  using Error::Error;
};

// Checkpoint file problems, split by kind so callers can map exit codes.
struct CheckpointError : Error {
  enum class Kind { io, corrupt, version_mismatch, vocab_mismatch, config_mismatch };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

}  // namespace gsamn
