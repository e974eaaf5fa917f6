#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "coordseg/geometry.hpp"

namespace coordseg {

using Bytes = std::vector<std::uint8_t>;

/// 8-bit RGB raster, row-major, 3 samples per pixel.
class Image {
 public:
  Image(ImageDims dims, std::uint8_t fill = 0);
  /// Throws DimensionMismatch unless pixels.size() == width*height*3.
  Image(ImageDims dims, std::vector<std::uint8_t> pixels);

  const ImageDims& dims() const noexcept { return dims_; }
  std::uint32_t width() const noexcept { return dims_.width; }
  std::uint32_t height() const noexcept { return dims_.height; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  std::span<const std::uint8_t, 3> at(std::uint32_t x, std::uint32_t y) const {
    return std::span<const std::uint8_t, 3>(pixels_.data() + offset(x, y), 3);
  }
  std::span<std::uint8_t, 3> at(std::uint32_t x, std::uint32_t y) {
    return std::span<std::uint8_t, 3>(pixels_.data() + offset(x, y), 3);
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(std::uint32_t x, std::uint32_t y) const noexcept {
    return (std::size_t{y} * dims_.width + x) * 3;
  }

  ImageDims dims_;
  std::vector<std::uint8_t> pixels_;
};

/// One bit per pixel, row-major.
class BinaryMask {
 public:
  explicit BinaryMask(ImageDims dims, bool fill = false);

  const ImageDims& dims() const noexcept { return dims_; }
  std::uint32_t width() const noexcept { return dims_.width; }
  std::uint32_t height() const noexcept { return dims_.height; }

  bool get(std::uint32_t x, std::uint32_t y) const noexcept {
    return bits_[std::size_t{y} * dims_.width + x];
  }
  void set(std::uint32_t x, std::uint32_t y, bool v) noexcept {
    bits_[std::size_t{y} * dims_.width + x] = v;
  }
  bool get(std::size_t index) const noexcept { return bits_[index]; }
  void set(std::size_t index, bool v) noexcept { bits_[index] = v; }

  std::size_t size() const noexcept { return bits_.size(); }
  std::size_t popcount() const noexcept;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  ImageDims dims_;
  std::vector<bool> bits_;
};

struct GridConfig {
  std::uint32_t cells_per_axis = 9;
  double opacity = 0.3;
  std::uint32_t line_width = 1;
  std::array<std::uint8_t, 3> line_color{0, 0, 0};
  bool draw_border = false;

  /// Throws Config on cells < 2, opacity outside [0,1] or zero line width.
  void validate() const;
  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

/// Start offsets of the grid lines along one axis of length `extent`:
/// round(i * extent / cells) for i = 1..cells-1, plus 0 and extent-width
/// when the border is drawn. Sorted, unique.
std::vector<std::uint32_t> grid_line_anchors(std::uint32_t extent,
                                             const GridConfig& cfg);

/// Alpha-blends grid lines onto a copy of `img`. Line pixels become
/// round((1-a)*src + a*color) per channel; every other pixel is untouched.
Image apply_grid_overlay(const Image& img, const GridConfig& cfg);

/// Reference segmenter: sets exactly the pixels of the half-open box.
/// Fractional corners cover pixel (x, y) iff x1 <= x+0.5 < x2 (pixel centers).
BinaryMask box_to_mask(const PixelBox& b, const ImageDims& d);

/// |a & b| / |a | b|, 1 when both are empty. Throws DimensionMismatch.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

// ---------------------------------------------------------------------------
// Encodings
// ---------------------------------------------------------------------------

enum class MaskFormat { Png, Rle };

std::string to_string(MaskFormat f);
MaskFormat parse_mask_format(const std::string& s);

/// RLE layout: "CSRLE1", u32le width, u32le height, then u32le run lengths
/// alternating zeros/ones, starting with zeros (possibly a zero-length run).
Bytes encode_mask(const BinaryMask& m, MaskFormat format);
/// Throws Decode with the byte offset of the first malformed element.
BinaryMask decode_mask(std::span<const std::uint8_t> bytes, MaskFormat format);

/// 8-bit RGB PNG.
Bytes encode_png(const Image& img);
/// Decodes PNG or JPEG (sniffed from the signature) to RGB.
Image decode_image(std::span<const std::uint8_t> bytes);
/// Dimensions from a PNG header without decoding pixel data.
ImageDims png_dims(std::span<const std::uint8_t> bytes);

Image read_image(const std::filesystem::path& path);
void write_png(const Image& img, const std::filesystem::path& path);
/// Masks are exported as 8-bit grayscale with 0 / 255.
void write_mask_png(const BinaryMask& m, const std::filesystem::path& path);

/// Raw 8-bit indices of a palette or grayscale PNG (no palette expansion),
/// e.g. VOC SegmentationObject instance maps.
std::vector<std::uint8_t> read_png_indices(const std::filesystem::path& path,
                                           ImageDims& dims_out);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace coordseg
