#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace latticeforge {

enum class ErrorCode {
  MalformedDocument,
  UnknownTile,
  NonPositiveWeight,
  BadDirection,
  EmptySample,
  BadDims,
  OutOfBounds,
  InvalidSeedTile,
  CellDecided,
  NoFrontier,
  InvalidPlacement,
  IllegalAction,
  EpisodeFinished,
  EmptyMask,
  DimensionMismatch,
  BadArchitecture,
  LengthMismatch,
  BadEpisodeCount,
  UnsupportedRank,
  BadConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::UnknownTile: return "UnknownTile";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::BadDirection: return "BadDirection";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::BadDims: return "BadDims";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::InvalidSeedTile: return "InvalidSeedTile";
    case ErrorCode::CellDecided: return "CellDecided";
    case ErrorCode::NoFrontier: return "NoFrontier";
    case ErrorCode::InvalidPlacement: return "InvalidPlacement";
    case ErrorCode::IllegalAction: return "IllegalAction";
    case ErrorCode::EpisodeFinished: return "EpisodeFinished";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadArchitecture: return "BadArchitecture";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::BadEpisodeCount: return "BadEpisodeCount";
    case ErrorCode::UnsupportedRank: return "UnsupportedRank";
    case ErrorCode::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace latticeforge
