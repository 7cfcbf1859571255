#pragma once

#include <stdexcept>
#include <string>

namespace facerec {

enum class ErrorCode {
  kMissingFile,
  kBadMagic,
  kTruncatedPayload,
  kZeroDimension,
  kBadHeader,
  kUnwritablePath,
  kInvalidArgument,
  kDimensionMismatch,
  kOutOfBounds,
  kSyntax,
  kValidation,
  kNonFinite,
  kEmptyGallery,
  kDataset,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace facerec
