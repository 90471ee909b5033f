#pragma once

#include <stdexcept>
#include <string>

namespace dancenet {

// Mirrors dn_status in dancenet.h; keep the numeric values in sync.
enum class ErrorCode : int {
  kSize = 1,
  kEmptyInput = 2,
  kIndex = 3,
  kConfig = 4,
  kShape = 5,
  kState = 6,
  kParse = 7,
  kLabel = 8,
  kNumeric = 9,
  kData = 10,
  kVersion = 11,
  kIo = 12,
  kDeterminism = 13,
  kCheckFailed = 14,
  kInternal = 15,
};

const char* error_code_name(ErrorCode code) noexcept;

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

}  // namespace dancenet
