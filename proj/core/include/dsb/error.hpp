#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dsb {

enum class ErrorCode {
  kNonPositiveStep,
  kNegativeTime,
  kInvalidArgument,
  kInvalidMixture,
  kSingularCovariance,
  kDimensionMismatch,
  kNoSamples,
  kNonFiniteState,
  kUnsupportedData,
  kTooFewSamples,
  kModeMismatch,
  kNegativeEigenvalue,
  kNotSymmetric,
  kDegenerateFit,
  kInvalidH,
  kIoFailure,
  kBadMagic,
  kVersionMismatch,
  kBadHeader,
  kTruncatedPayload,
  kTrailingData,
  kNonFiniteData,
  kBadMetadata,
  kBadConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dsb
