#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pacc {

// Base class for all library errors. `code` is a stable machine-readable
// name ("UnclosedRingBond", "ShapeMismatch", ...) consumed by the CLI exit
// paths and the prediction service error mapping.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace pacc
