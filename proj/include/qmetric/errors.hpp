#pragma once

#include <stdexcept>
#include <string>

namespace qmetric {

enum class ErrorKind {
  InvalidInput,
  Shape,
  SingularInput,
  UnboundedProblem,
  NotALipNorm,
  UnsupportedDimension,
  InvalidBridge,
  Contract,
  Unsupported,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::SingularInput: return "singular-input";
    case ErrorKind::UnboundedProblem: return "unbounded-problem";
    case ErrorKind::NotALipNorm: return "not-a-lipnorm";
    case ErrorKind::UnsupportedDimension: return "unsupported-dimension";
    case ErrorKind::InvalidBridge: return "invalid-bridge";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace qmetric
