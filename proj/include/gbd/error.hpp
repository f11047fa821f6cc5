#pragma once

#include <stdexcept>
#include <string>

namespace gbd {

/// Error categories. Values match the status codes of the C API.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kLoad = 2,
  kFormat = 3,
  kConfig = 4,
  kNumeric = 5,
  kPrecondition = 6,
  kInternal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace gbd
