#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace coordseg {

enum class ErrorCode {
  // geometry / validation
  NonFinite,
  OutOfRange,
  Degenerate,
  OutOfBounds,
  InvalidDims,
  // extraction
  NoQuadrupleFound,
  PixelValuesWithoutDims,
  // imaging
  Config,
  DimensionMismatch,
  Decode,
  ImageIo,
  // datasets
  Malformed,
  MissingPath,
  MissingReference,
  SubsetTooLarge,
  // backends
  Timeout,
  TransportFailure,
  NonSuccessStatus,
  MaskDimensionMismatch,
  Protocol,
  // evaluation
  EmptySlice,
  // anything not raised by this library
  Internal,
};

std::string_view to_string(ErrorCode code) noexcept;
/// Inverse of to_string; nullopt for unknown names.
std::optional<ErrorCode> parse_error_code(std::string_view name) noexcept;

/// Half-open character range [begin, end) into some source text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

/// The single exception type thrown by the library. The code identifies the
/// failure class; the message carries the human-readable detail (offending
/// field, path, byte offset, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Byte offset for decode errors, when known.
  std::optional<std::size_t> offset;
  /// Source span for extraction errors raised after a quadruple matched.
  std::optional<Span> span;
  /// HTTP status for NonSuccessStatus.
  std::optional<int> status;

 private:
  ErrorCode code_;
};

}  // namespace coordseg
