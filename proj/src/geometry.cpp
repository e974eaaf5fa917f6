#include "coordseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace coordseg {

namespace {

constexpr std::array<const char*, 4> kFieldNames{"x1", "y1", "x2", "y2"};

void require_finite(const std::array<double, 4>& c) {
  for (std::size_t i = 0; i < 4; ++i) {
    if (!std::isfinite(c[i])) {
      throw Error(ErrorCode::NonFinite,
                  fmt::format("{} is not finite ({})", kFieldNames[i], c[i]));
    }
  }
}

void require_ordered(const std::array<double, 4>& c) {
  if (!(c[0] < c[2])) {
    throw Error(ErrorCode::Degenerate,
                fmt::format("degenerate box: x1 ({}) >= x2 ({})", c[0], c[2]));
  }
  if (!(c[1] < c[3])) {
    throw Error(ErrorCode::Degenerate,
                fmt::format("degenerate box: y1 ({}) >= y2 ({})", c[1], c[3]));
  }
}

double area(const detail::Rect& r) noexcept {
  return (r.x2 - r.x1) * (r.y2 - r.y1);
}

double intersection_area(const detail::Rect& a, const detail::Rect& b) noexcept {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

}  // namespace

ImageDims::ImageDims(std::uint32_t w, std::uint32_t h) : width(w), height(h) {
  if (w == 0 || h == 0) {
    throw Error(ErrorCode::InvalidDims,
                fmt::format("image dims must be positive, got {}x{}", w, h));
  }
}

NormBox::NormBox(double x1, double y1, double x2, double y2)
    : c_{x1, y1, x2, y2} {
  require_finite(c_);
  for (std::size_t i = 0; i < 4; ++i) {
    if (c_[i] < 0.0 || c_[i] > 1.0) {
      throw Error(ErrorCode::OutOfRange,
                  fmt::format("{} = {} outside [0,1]", kFieldNames[i], c_[i]));
    }
  }
  require_ordered(c_);
}

PixelBox::PixelBox(double x1, double y1, double x2, double y2)
    : c_{x1, y1, x2, y2} {
  require_finite(c_);
  require_ordered(c_);
}

bool PixelBox::within(const ImageDims& d) const noexcept {
  return c_[0] >= 0.0 && c_[1] >= 0.0 && c_[2] <= d.width && c_[3] <= d.height;
}

void PixelBox::require_within(const ImageDims& d) const {
  const std::array<double, 4> limit{0.0, 0.0, static_cast<double>(d.width),
                                    static_cast<double>(d.height)};
  for (std::size_t i = 0; i < 2; ++i) {
    if (c_[i] < 0.0) {
      throw Error(ErrorCode::OutOfBounds,
                  fmt::format("{} = {} is negative", kFieldNames[i], c_[i]));
    }
  }
  for (std::size_t i = 2; i < 4; ++i) {
    if (c_[i] > limit[i]) {
      throw Error(ErrorCode::OutOfBounds,
                  fmt::format("{} = {} exceeds image {} {}", kFieldNames[i],
                              c_[i], i == 2 ? "width" : "height", limit[i]));
    }
  }
}

ClampMode parse_clamp_mode(const std::string& s) {
  if (s == "strict") return ClampMode::Strict;
  if (s == "clamp") return ClampMode::Clamp;
  throw Error(ErrorCode::Config, "clamp mode must be 'strict' or 'clamp', got '" + s + "'");
}

std::string to_string(ClampMode m) {
  return m == ClampMode::Strict ? "strict" : "clamp";
}

NormBox normalize_box(const PixelBox& b, const ImageDims& d) {
  b.require_within(d);
  const double w = d.width;
  const double h = d.height;
  return NormBox{b.x1() / w, b.y1() / h, b.x2() / w, b.y2() / h};
}

PixelBox denormalize_box(const NormBox& nb, const ImageDims& d) {
  const double w = d.width;
  const double h = d.height;
  return PixelBox{nb.x1() * w, nb.y1() * h, nb.x2() * w, nb.y2() * h};
}

PixelBox to_raster(const PixelBox& b, const ImageDims& d) {
  auto snap = [](double lo, double hi, double extent) {
    lo = std::clamp(std::round(lo), 0.0, extent - 1.0);
    hi = std::clamp(std::round(hi), 0.0, extent);
    if (hi <= lo) hi = lo + 1.0;
    return std::pair{lo, hi};
  };
  auto [x1, x2] = snap(b.x1(), b.x2(), d.width);
  auto [y1, y2] = snap(b.y1(), b.y2(), d.height);
  return PixelBox{x1, y1, x2, y2};
}

NormBox validate_coordinates(const std::array<double, 4>& raw, ClampMode mode) {
  require_finite(raw);
  auto c = raw;
  if (mode == ClampMode::Clamp) {
    for (double& v : c) v = std::clamp(v, 0.0, 1.0);
  } else {
    for (std::size_t i = 0; i < 4; ++i) {
      if (c[i] < 0.0 || c[i] > 1.0) {
        throw Error(ErrorCode::OutOfRange,
                    fmt::format("{} = {} outside [0,1]", kFieldNames[i], c[i]));
      }
    }
  }
  require_ordered(c);
  return NormBox{c[0], c[1], c[2], c[3]};
}

namespace detail {

Rect enclosing(const Rect& a, const Rect& b) noexcept {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
          std::max(a.y2, b.y2)};
}

double iou(const Rect& a, const Rect& b) noexcept {
  const double inter = intersection_area(a, b);
  const double uni = area(a) + area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double giou(const Rect& a, const Rect& b) noexcept {
  const double inter = intersection_area(a, b);
  const double uni = area(a) + area(b) - inter;
  const double hull = area(enclosing(a, b));
  if (uni <= 0.0 || hull <= 0.0) return 0.0;
  return inter / uni - (hull - uni) / hull;
}

double ciou(const Rect& a, const Rect& b) noexcept {
  const double base = iou(a, b);
  const Rect c = enclosing(a, b);
  const double cw = c.x2 - c.x1;
  const double ch = c.y2 - c.y1;
  const double diag2 = cw * cw + ch * ch;
  if (diag2 <= 0.0) return base;

  const double dx = (a.x1 + a.x2) * 0.5 - (b.x1 + b.x2) * 0.5;
  const double dy = (a.y1 + a.y2) * 0.5 - (b.y1 + b.y2) * 0.5;
  const double rho2 = dx * dx + dy * dy;

  const double dtheta = std::atan((b.x2 - b.x1) / (b.y2 - b.y1)) -
                        std::atan((a.x2 - a.x1) / (a.y2 - a.y1));
  const double v = 4.0 / (std::numbers::pi * std::numbers::pi) * dtheta * dtheta;
  const double alpha = v > 0.0 ? v / ((1.0 - base) + v) : 0.0;
  return base - rho2 / diag2 - alpha * v;
}

}  // namespace detail

}  // namespace coordseg
