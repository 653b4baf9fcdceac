#pragma once

#include <stdexcept>
#include <string>

namespace kdeformer {

enum class ErrorCode {
  kDimensionMismatch,
  kInvalidArgument,
  kNumerical,
  kParse,
  kIo,
  kConfig,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable category alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace kdeformer
