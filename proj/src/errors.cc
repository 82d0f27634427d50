#include "dmfsync/errors.h"

namespace dmfsync {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage:
      return "usage";
    case ErrorCode::kIo:
      return "io";
    case ErrorCode::kParse:
      return "parse";
    case ErrorCode::kInvariant:
      return "invariant";
    case ErrorCode::kDisconnected:
      return "disconnected";
    case ErrorCode::kSpectralGap:
      return "spectral-gap";
    case ErrorCode::kDegenerateProjection:
      return "degenerate-projection";
    case ErrorCode::kDivergence:
      return "divergence";
    case ErrorCode::kRejectionLimit:
      return "rejection-limit";
    case ErrorCode::kDimensionMismatch:
      return "dimension-mismatch";
  }
  return "unknown";
}

}  // namespace dmfsync
