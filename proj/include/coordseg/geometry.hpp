#pragma once

#include <array>
#include <concepts>
#include <cstdint>
#include <string>

#include "coordseg/error.hpp"

namespace coordseg {

struct ImageDims {
  std::uint32_t width = 1;
  std::uint32_t height = 1;

  ImageDims() = default;
  /// Throws InvalidDims when either side is zero.
  ImageDims(std::uint32_t w, std::uint32_t h);

  std::uint64_t area() const noexcept { return std::uint64_t{width} * height; }
  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

/// Box in normalized [0,1] space. Construction enforces
/// 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1.
class NormBox {
 public:
  NormBox(double x1, double y1, double x2, double y2);

  double x1() const noexcept { return c_[0]; }
  double y1() const noexcept { return c_[1]; }
  double x2() const noexcept { return c_[2]; }
  double y2() const noexcept { return c_[3]; }
  const std::array<double, 4>& corners() const noexcept { return c_; }

  friend bool operator==(const NormBox&, const NormBox&) = default;

 private:
  std::array<double, 4> c_;
};

/// Box in pixel space covering the half-open region [x1,x2) x [y1,y2).
/// Construction enforces finite corners with x1 < x2 and y1 < y2; the
/// image-bounds invariant is checked separately by `require_within`.
class PixelBox {
 public:
  PixelBox(double x1, double y1, double x2, double y2);

  double x1() const noexcept { return c_[0]; }
  double y1() const noexcept { return c_[1]; }
  double x2() const noexcept { return c_[2]; }
  double y2() const noexcept { return c_[3]; }
  double width() const noexcept { return c_[2] - c_[0]; }
  double height() const noexcept { return c_[3] - c_[1]; }
  const std::array<double, 4>& corners() const noexcept { return c_; }

  bool within(const ImageDims& d) const noexcept;
  /// Throws OutOfBounds naming the first offending field.
  void require_within(const ImageDims& d) const;

  friend bool operator==(const PixelBox&, const PixelBox&) = default;

 private:
  std::array<double, 4> c_;
};

struct MetricTriple {
  double iou = 0.0;
  double giou = 0.0;
  double ciou = 0.0;
  friend bool operator==(const MetricTriple&, const MetricTriple&) = default;
};

enum class ClampMode { Strict, Clamp };

ClampMode parse_clamp_mode(const std::string& s);
std::string to_string(ClampMode m);

// ---------------------------------------------------------------------------
// Coordinate conversion
// ---------------------------------------------------------------------------

/// x / width, y / height. Requires the box to lie within `d`.
NormBox normalize_box(const PixelBox& b, const ImageDims& d);

/// x * width, y * height, real-valued (no rounding).
PixelBox denormalize_box(const NormBox& nb, const ImageDims& d);

/// Integer pixel box for raster consumers: round half away from zero, clamp
/// to the image, and widen to at least one pixel per axis if rounding
/// collapsed the box.
PixelBox to_raster(const PixelBox& b, const ImageDims& d);

/// Checks a raw quadruple against the normalized range. Strict mode rejects
/// anything outside [0,1]; clamp mode clamps each component first.
NormBox validate_coordinates(const std::array<double, 4>& raw,
                             ClampMode mode = ClampMode::Strict);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

template <typename B>
concept Box = std::same_as<B, NormBox> || std::same_as<B, PixelBox>;

namespace detail {
struct Rect {
  double x1, y1, x2, y2;
};
double iou(const Rect& a, const Rect& b) noexcept;
double giou(const Rect& a, const Rect& b) noexcept;
double ciou(const Rect& a, const Rect& b) noexcept;
Rect enclosing(const Rect& a, const Rect& b) noexcept;

template <Box B>
Rect rect_of(const B& b) noexcept {
  return {b.x1(), b.y1(), b.x2(), b.y2()};
}
}  // namespace detail

// Both arguments share one template parameter, so mixing a NormBox with a
// PixelBox does not compile.

template <Box B>
double iou(const B& a, const B& b) noexcept {
  return detail::iou(detail::rect_of(a), detail::rect_of(b));
}

template <Box B>
double giou(const B& a, const B& b) noexcept {
  return detail::giou(detail::rect_of(a), detail::rect_of(b));
}

/// CIoU with v = 4/pi^2 (atan(w_b/h_b) - atan(w_a/h_a))^2 and
/// alpha = v / ((1 - IoU) + v), alpha = 0 when v = 0.
template <Box B>
double ciou(const B& a, const B& b) noexcept {
  return detail::ciou(detail::rect_of(a), detail::rect_of(b));
}

template <Box B>
MetricTriple metrics(const B& predicted, const B& truth) noexcept {
  return {iou(predicted, truth), giou(predicted, truth), ciou(predicted, truth)};
}

template <Box B>
B enclosing_box(const B& a, const B& b) {
  auto r = detail::enclosing(detail::rect_of(a), detail::rect_of(b));
  return B{r.x1, r.y1, r.x2, r.y2};
}

}  // namespace coordseg
