#include "coordseg/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <fmt/format.h>

namespace coordseg {

namespace {

constexpr std::string_view kRleMagic = "CSRLE1";
constexpr std::size_t kRleHeaderSize = kRleMagic.size() + 8;

void put_u32le(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32le(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[at + i]} << (8 * i);
  return v;
}

Error decode_error(std::size_t offset, const std::string& what) {
  Error e(ErrorCode::Decode, fmt::format("malformed mask payload at byte {}: {}", offset, what));
  e.offset = offset;
  return e;
}

std::uint8_t blend(std::uint8_t src, std::uint8_t color, double opacity) {
  const double v = (1.0 - opacity) * src + opacity * color;
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

Bytes encode_rle(const BinaryMask& m) {
  Bytes out(kRleMagic.begin(), kRleMagic.end());
  put_u32le(out, m.width());
  put_u32le(out, m.height());
  bool current = false;
  std::uint32_t run = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.get(i) != current) {
      put_u32le(out, run);
      current = !current;
      run = 0;
    }
    ++run;
  }
  put_u32le(out, run);
  return out;
}

BinaryMask decode_rle(std::span<const std::uint8_t> in) {
  if (in.size() < kRleMagic.size() ||
      std::memcmp(in.data(), kRleMagic.data(), kRleMagic.size()) != 0) {
    throw decode_error(0, "missing CSRLE1 header");
  }
  if (in.size() < kRleHeaderSize) {
    throw decode_error(in.size(), "truncated dimensions");
  }
  const std::uint32_t w = get_u32le(in, 6);
  const std::uint32_t h = get_u32le(in, 10);
  if (w == 0) throw decode_error(6, "zero width");
  if (h == 0) throw decode_error(10, "zero height");
  if ((in.size() - kRleHeaderSize) % 4 != 0) {
    throw decode_error(in.size() - (in.size() - kRleHeaderSize) % 4, "trailing partial run length");
  }

  BinaryMask m(ImageDims{w, h});
  const std::uint64_t total = m.size();
  std::uint64_t filled = 0;
  bool value = false;
  bool first = true;
  for (std::size_t at = kRleHeaderSize; at < in.size(); at += 4) {
    const std::uint32_t run = get_u32le(in, at);
    if (run == 0 && !first) throw decode_error(at, "zero-length run");
    if (filled + run > total) {
      throw decode_error(at, fmt::format("runs exceed {} pixels", total));
    }
    if (value) {
      for (std::uint64_t i = filled; i < filled + run; ++i) m.set(static_cast<std::size_t>(i), true);
    }
    filled += run;
    value = !value;
    first = false;
  }
  if (filled != total) {
    throw decode_error(in.size(), fmt::format("runs cover {} of {} pixels", filled, total));
  }
  return m;
}

}  // namespace

Image::Image(ImageDims dims, std::uint8_t fill)
    : dims_(dims), pixels_(dims.area() * 3, fill) {}

Image::Image(ImageDims dims, std::vector<std::uint8_t> pixels)
    : dims_(dims), pixels_(std::move(pixels)) {
  if (pixels_.size() != dims_.area() * 3) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("pixel buffer has {} bytes, {}x{} RGB needs {}", pixels_.size(),
                            dims_.width, dims_.height, dims_.area() * 3));
  }
}

BinaryMask::BinaryMask(ImageDims dims, bool fill)
    : dims_(dims), bits_(dims.area(), fill) {}

std::size_t BinaryMask::popcount() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

void GridConfig::validate() const {
  if (cells_per_axis < 2) {
    throw Error(ErrorCode::Config,
                fmt::format("grid cells_per_axis must be >= 2, got {}", cells_per_axis));
  }
  if (!(opacity >= 0.0 && opacity <= 1.0)) {
    throw Error(ErrorCode::Config, fmt::format("grid opacity must be in [0,1], got {}", opacity));
  }
  if (line_width == 0) {
    throw Error(ErrorCode::Config, "grid line_width must be positive");
  }
}

std::vector<std::uint32_t> grid_line_anchors(std::uint32_t extent, const GridConfig& cfg) {
  std::vector<std::uint32_t> anchors;
  if (cfg.draw_border) anchors.push_back(0);
  for (std::uint32_t i = 1; i < cfg.cells_per_axis; ++i) {
    const double pos = std::round(static_cast<double>(i) * extent / cfg.cells_per_axis);
    anchors.push_back(static_cast<std::uint32_t>(pos));
  }
  if (cfg.draw_border) {
    anchors.push_back(extent > cfg.line_width ? extent - cfg.line_width : 0);
  }
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
  std::erase_if(anchors, [extent](std::uint32_t a) { return a >= extent; });
  return anchors;
}

Image apply_grid_overlay(const Image& img, const GridConfig& cfg) {
  cfg.validate();
  Image out = img;

  auto on_line = [&cfg](std::uint32_t extent) {
    std::vector<bool> mark(extent, false);
    for (std::uint32_t a : grid_line_anchors(extent, cfg)) {
      const std::uint32_t end = std::min<std::uint64_t>(std::uint64_t{a} + cfg.line_width, extent);
      for (std::uint32_t i = a; i < end; ++i) mark[i] = true;
    }
    return mark;
  };
  const auto cols = on_line(img.width());
  const auto rows = on_line(img.height());

  for (std::uint32_t y = 0; y < img.height(); ++y) {
    for (std::uint32_t x = 0; x < img.width(); ++x) {
      if (!rows[y] && !cols[x]) continue;
      auto px = out.at(x, y);
      for (int c = 0; c < 3; ++c) px[c] = blend(px[c], cfg.line_color[c], cfg.opacity);
    }
  }
  return out;
}

BinaryMask box_to_mask(const PixelBox& b, const ImageDims& d) {
  b.require_within(d);
  BinaryMask m(d);
  // First pixel index whose center (i + 0.5) is >= v.
  auto first_center_at_or_after = [](double v) {
    return static_cast<std::int64_t>(std::ceil(v - 0.5));
  };
  const auto x0 = std::max<std::int64_t>(0, first_center_at_or_after(b.x1()));
  const auto x1 = std::min<std::int64_t>(d.width, first_center_at_or_after(b.x2()));
  const auto y0 = std::max<std::int64_t>(0, first_center_at_or_after(b.y1()));
  const auto y1 = std::min<std::int64_t>(d.height, first_center_at_or_after(b.y2()));
  for (auto y = y0; y < y1; ++y) {
    for (auto x = x0; x < x1; ++x) {
      m.set(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y), true);
    }
  }
  return m;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.dims() != b.dims()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("mask dims differ: {}x{} vs {}x{}", a.width(), a.height(),
                            b.width(), b.height()));
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a.get(i);
    const bool pb = b.get(i);
    inter += pa && pb;
    uni += pa || pb;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string to_string(MaskFormat f) { return f == MaskFormat::Png ? "png" : "rle"; }

MaskFormat parse_mask_format(const std::string& s) {
  if (s == "png") return MaskFormat::Png;
  if (s == "rle") return MaskFormat::Rle;
  throw Error(ErrorCode::Config, "mask format must be 'png' or 'rle', got '" + s + "'");
}

Bytes encode_mask_png(const BinaryMask& m);
BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes);

Bytes encode_mask(const BinaryMask& m, MaskFormat format) {
  return format == MaskFormat::Rle ? encode_rle(m) : encode_mask_png(m);
}

BinaryMask decode_mask(std::span<const std::uint8_t> bytes, MaskFormat format) {
  return format == MaskFormat::Rle ? decode_rle(bytes) : decode_mask_png(bytes);
}

}  // namespace coordseg
