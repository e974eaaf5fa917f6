#pragma once

#include <optional>
#include <string_view>

#include "coordseg/geometry.hpp"

namespace coordseg {

struct ExtractionOutcome {
  NormBox box;
  /// Offsets of the matched quadruple in the raw text, including the
  /// enclosing bracket pair when there is one.
  Span source_span;
};

/// Finds the leftmost group of exactly four numbers in detector output and
/// turns it into a validated NormBox.
///
/// A group is a run of numbers separated only by commas and/or whitespace;
/// anything else (brackets, parentheses, words) ends the run. Numbers glued
/// to letters ("x1", "Qwen2") are not numbers. If every value is <= 1 the
/// group is read as normalized; otherwise it is read as pixels, which needs
/// `dims`.
///
/// Errors: NoQuadrupleFound, PixelValuesWithoutDims, and the validation
/// codes from validate_coordinates / normalize_box with `span` attached.
ExtractionOutcome parse_coordinate_text(std::string_view text,
                                        std::optional<ImageDims> dims = std::nullopt,
                                        ClampMode mode = ClampMode::Strict);

/// "[x1,y1,x2,y2]" with fixed decimals.
std::string format_norm_box(const NormBox& b, int decimals = 6);

}  // namespace coordseg
