#pragma once

#include <stdexcept>
#include <string>

namespace stylesplat {

// Bad command lines, malformed configs, invalid argument combinations.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& m) : std::runtime_error(m) {}
};

// Missing or corrupt datasets and other on-disk inputs.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& m) : std::runtime_error(m) {}
};

// Checkpoints whose architecture or format does not match the running model.
struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace stylesplat
