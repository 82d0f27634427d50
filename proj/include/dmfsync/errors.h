#pragma once

#include <stdexcept>
#include <string>

namespace dmfsync {

// Stable enumeration; the CLI uses these values as process exit codes.
enum class ErrorCode : int {
  kUsage = 1,
  kIo = 2,
  kParse = 3,
  kInvariant = 4,
  kDisconnected = 5,
  kSpectralGap = 6,
  kDegenerateProjection = 7,
  kDivergence = 8,
  kRejectionLimit = 9,
  kDimensionMismatch = 10,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

#define DMFSYNC_DEFINE_ERROR(Name, Code)                          \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& message)                     \
        : Error(ErrorCode::Code, message) {}                      \
  }

DMFSYNC_DEFINE_ERROR(UsageError, kUsage);
DMFSYNC_DEFINE_ERROR(IoError, kIo);
DMFSYNC_DEFINE_ERROR(ParseError, kParse);
DMFSYNC_DEFINE_ERROR(InvariantError, kInvariant);
DMFSYNC_DEFINE_ERROR(DisconnectedGraphError, kDisconnected);
DMFSYNC_DEFINE_ERROR(SpectralGapError, kSpectralGap);
DMFSYNC_DEFINE_ERROR(DegenerateProjectionError, kDegenerateProjection);
DMFSYNC_DEFINE_ERROR(DivergenceError, kDivergence);
DMFSYNC_DEFINE_ERROR(RejectionLimitError, kRejectionLimit);
DMFSYNC_DEFINE_ERROR(DimensionMismatchError, kDimensionMismatch);

#undef DMFSYNC_DEFINE_ERROR

}  // namespace dmfsync
