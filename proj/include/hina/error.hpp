#pragma once

#include <stdexcept>
#include <string>

namespace hina {

// Every library failure carries a stable machine-readable code ("UnknownLabel",
// "InvalidPartition", ...). The service and CLI surface the code verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Malformed request or configuration (as opposed to bad data).
class UsageError : public Error {
 public:
  using Error::Error;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace hina
