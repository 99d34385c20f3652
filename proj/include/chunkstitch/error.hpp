#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chunkstitch {

enum class ErrorCode {
  AngleAtPi,
  InvalidWindow,
  ShapeMismatch,
  DegenerateGeometry,
  NoOverlap,
  InsufficientReliablePoints,
  ZeroToken,
  ZeroVector,
  TooFewFrames,
  RankDeficient,
  ZeroProjection,
  NotConnected,
  TooFewCommonFrames,
  EmptyCloud,
  InvalidSpec,
  BadMagic,
  TruncatedPayload,
  DimOverflow,
  MissingFile,
  ParseError,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; code() identifies the
// contract that was violated, what() carries the context (path, edge, stage).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace chunkstitch
