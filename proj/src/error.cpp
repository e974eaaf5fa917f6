#include "coordseg/error.hpp"

namespace coordseg {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::InvalidDims: return "InvalidDims";
    case ErrorCode::NoQuadrupleFound: return "NoQuadrupleFound";
    case ErrorCode::PixelValuesWithoutDims: return "PixelValuesWithoutDims";
    case ErrorCode::Config: return "Config";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Decode: return "Decode";
    case ErrorCode::ImageIo: return "ImageIo";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::MissingPath: return "MissingPath";
    case ErrorCode::MissingReference: return "MissingReference";
    case ErrorCode::SubsetTooLarge: return "SubsetTooLarge";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TransportFailure: return "TransportFailure";
    case ErrorCode::NonSuccessStatus: return "NonSuccessStatus";
    case ErrorCode::MaskDimensionMismatch: return "MaskDimensionMismatch";
    case ErrorCode::Protocol: return "Protocol";
    case ErrorCode::EmptySlice: return "EmptySlice";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

std::optional<ErrorCode> parse_error_code(std::string_view name) noexcept {
  for (int i = 0; i <= static_cast<int>(ErrorCode::Internal); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

}  // namespace coordseg
