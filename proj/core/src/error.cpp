#include "dsb/error.hpp"

namespace dsb {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kNonPositiveStep: return "NON_POSITIVE_STEP";
    case ErrorCode::kNegativeTime: return "NEGATIVE_TIME";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kInvalidMixture: return "INVALID_MIXTURE";
    case ErrorCode::kSingularCovariance: return "SINGULAR_COVARIANCE";
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kNoSamples: return "NO_SAMPLES";
    case ErrorCode::kNonFiniteState: return "NON_FINITE_STATE";
    case ErrorCode::kUnsupportedData: return "UNSUPPORTED_DATA";
    case ErrorCode::kTooFewSamples: return "TOO_FEW_SAMPLES";
    case ErrorCode::kModeMismatch: return "MODE_MISMATCH";
    case ErrorCode::kNegativeEigenvalue: return "NEGATIVE_EIGENVALUE";
    case ErrorCode::kNotSymmetric: return "NOT_SYMMETRIC";
    case ErrorCode::kDegenerateFit: return "DEGENERATE_FIT";
    case ErrorCode::kInvalidH: return "INVALID_H";
    case ErrorCode::kIoFailure: return "IO_FAILURE";
    case ErrorCode::kBadMagic: return "BAD_MAGIC";
    case ErrorCode::kVersionMismatch: return "VERSION_MISMATCH";
    case ErrorCode::kBadHeader: return "BAD_HEADER";
    case ErrorCode::kTruncatedPayload: return "TRUNCATED_PAYLOAD";
    case ErrorCode::kTrailingData: return "TRAILING_DATA";
    case ErrorCode::kNonFiniteData: return "NON_FINITE_DATA";
    case ErrorCode::kBadMetadata: return "BAD_METADATA";
    case ErrorCode::kBadConfig: return "BAD_CONFIG";
  }
  return "UNKNOWN";
}

}  // namespace dsb
