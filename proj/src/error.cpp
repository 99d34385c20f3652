#include "chunkstitch/error.hpp"

namespace chunkstitch {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AngleAtPi: return "AngleAtPi";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::InsufficientReliablePoints: return "InsufficientReliablePoints";
    case ErrorCode::ZeroToken: return "ZeroToken";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ZeroProjection: return "ZeroProjection";
    case ErrorCode::NotConnected: return "NotConnected";
    case ErrorCode::TooFewCommonFrames: return "TooFewCommonFrames";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::DimOverflow: return "DimOverflow";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace chunkstitch
