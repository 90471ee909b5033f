#include "dancenet/error.hpp"

namespace dancenet {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kSize: return "size error";
    case ErrorCode::kEmptyInput: return "empty-input error";
    case ErrorCode::kIndex: return "index error";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kState: return "state error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kLabel: return "label error";
    case ErrorCode::kNumeric: return "numeric error";
    case ErrorCode::kData: return "data error";
    case ErrorCode::kVersion: return "version error";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kDeterminism: return "determinism error";
    case ErrorCode::kCheckFailed: return "check failed";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown error";
}

}  // namespace dancenet
