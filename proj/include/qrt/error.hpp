#pragma once

#include <stdexcept>
#include <string>

namespace qrt {

/// Failure categories; the CLI maps each one onto a process exit code.
enum class ErrorKind {
  kConfig,      // invalid parameters or configuration
  kData,        // unreadable, malformed or mismatched data files
  kStructural,  // shape/length mismatch between in-memory objects
  kNumerical,   // a numerical procedure failed to converge
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace qrt
