#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mdvc {

// Values mirror mdvc_status in include/mdvc.h; keep the two in sync.
enum class ErrorCode : int {
  kDimension = 1,
  kIndex = 2,
  kDegenerateMask = 3,
  kParameter = 4,
  kContract = 5,
  kConfig = 6,
  kNumericFault = 7,
  kRange = 8,
  kParse = 9,
  kCheckpoint = 10,
  kAlignment = 11,
  kFusion = 12,
  kIo = 13,
  kInvalidArgument = 14,
  kInternal = 15,
};

std::string_view error_code_name(ErrorCode code) noexcept;

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

}  // namespace mdvc
