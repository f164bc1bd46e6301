#pragma once

#include <stdexcept>
#include <string>

namespace ostr {

// Raised by resize_normalize when content would exceed the canonical width;
// callers skip the sample with a warning.
struct WidthOverflowError : std::runtime_error {
  explicit WidthOverflowError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a NaN shows up in gradients or loss terms.
struct TrainingDivergence : std::runtime_error {
  explicit TrainingDivergence(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset I/O failure, message carries the offending path.
struct DatasetWriteError : std::runtime_error {
  explicit DatasetWriteError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ostr
