#include "kdeformer/core/error.hpp"

namespace kdeformer {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDimensionMismatch:
      return "dimension mismatch";
    case ErrorCode::kInvalidArgument:
      return "invalid argument";
    case ErrorCode::kNumerical:
      return "numerical error";
    case ErrorCode::kParse:
      return "parse error";
    case ErrorCode::kIo:
      return "io error";
    case ErrorCode::kConfig:
      return "config error";
  }
  return "unknown error";
}

void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

}  // namespace kdeformer
