#pragma once

#include <stdexcept>
#include <string>

namespace caseret {

enum class ErrorKind {
  Usage,
  Config,
  Io,
  Parse,
  Integrity,
  Domain,
  Contract,
  Shape,
  Lookup,
  Format,
  EmptyResult,
  Encode,
  Numerical,
  Transport,
};

const char* to_string(ErrorKind kind) noexcept;

// Process exit code for an error kind: 1 usage/config, 2 data, 3 LLM transport.
int exit_code_for(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, bool retryable = false, std::string payload = {});

  ErrorKind kind() const noexcept { return kind_; }
  bool retryable() const noexcept { return retryable_; }
  // Raw data attached to the failure, e.g. an unparseable LLM response.
  const std::string& payload() const noexcept { return payload_; }

 private:
  ErrorKind kind_;
  bool retryable_;
  std::string payload_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace caseret
