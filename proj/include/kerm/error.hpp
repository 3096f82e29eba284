#pragma once

#include <stdexcept>
#include <string>

namespace kerm {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kParse = 3,
  kDimensionMismatch = 4,
  kNumeric = 5,
  kRemote = 6,
  kRuntime = 7,
};

// Base exception for every failure raised by the library. The C API maps
// the code onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace kerm
