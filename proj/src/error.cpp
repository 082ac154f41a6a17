#include "caseret/error.hpp"

namespace caseret {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage: return "usage error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "io error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Integrity: return "integrity error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Contract: return "contract error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Lookup: return "lookup error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::EmptyResult: return "empty result";
    case ErrorKind::Encode: return "encode error";
    case ErrorKind::Numerical: return "numerical error";
    case ErrorKind::Transport: return "transport error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::Config:
      return 1;
    case ErrorKind::Transport:
      return 3;
    default:
      return 2;
  }
}

Error::Error(ErrorKind kind, const std::string& message, bool retryable, std::string payload)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      retryable_(retryable),
      payload_(std::move(payload)) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace caseret
