#include "mdvc/error.hpp"

namespace mdvc {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDimension: return "dimension_error";
    case ErrorCode::kIndex: return "index_error";
    case ErrorCode::kDegenerateMask: return "degenerate_mask";
    case ErrorCode::kParameter: return "parameter_error";
    case ErrorCode::kContract: return "contract_error";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kNumericFault: return "numeric_fault";
    case ErrorCode::kRange: return "range_error";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kCheckpoint: return "checkpoint_error";
    case ErrorCode::kAlignment: return "alignment_error";
    case ErrorCode::kFusion: return "fusion_error";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInternal: return "internal_error";
  }
  return "unknown_error";
}

}  // namespace mdvc
