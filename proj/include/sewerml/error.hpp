#pragma once

#include <stdexcept>
#include <string>

namespace sewerml {

enum class ErrorCode {
  kInvalidArgument,  // violated precondition of a library call
  kParse,            // malformed input file
  kValidation,       // well-formed input that breaks a domain invariant
  kDegenerate,       // data on which the requested statistic is undefined
  kIo,               // file missing or unwritable
  kConfig,           // bad run configuration
  kDependency,       // missing or stale upstream artifact
};

const char* to_string(ErrorCode code);

/// Every library failure is reported through this type. The CLI maps the
/// code onto a process exit status (see exit_status()).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// 2 for configuration and IO problems, 1 for everything computed.
int exit_status(ErrorCode code);

}  // namespace sewerml
