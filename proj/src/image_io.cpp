// PNG and JPEG I/O on top of libpng's simplified API and libjpeg.

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <jpeglib.h>
#include <png.h>

#include "coordseg/imaging.hpp"

namespace coordseg {

namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin());
}

bool is_jpeg(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

struct PngImage {
  png_image img{};
  PngImage() {
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

Bytes write_png_memory(const std::uint8_t* data, std::uint32_t w, std::uint32_t h,
                       png_uint_32 format) {
  PngImage p;
  p.img.width = w;
  p.img.height = h;
  p.img.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&p.img, nullptr, &size, 0, data, 0, nullptr)) {
    throw Error(ErrorCode::ImageIo, std::string("PNG encode failed: ") + p.img.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&p.img, out.data(), &size, 0, data, 0, nullptr)) {
    throw Error(ErrorCode::ImageIo, std::string("PNG encode failed: ") + p.img.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> read_png_memory(std::span<const std::uint8_t> bytes, png_uint_32 format,
                                          ImageDims& dims, ErrorCode code) {
  PngImage p;
  if (!png_image_begin_read_from_memory(&p.img, bytes.data(), bytes.size())) {
    throw Error(code, std::string("PNG decode failed: ") + p.img.message);
  }
  p.img.format = format;
  dims = ImageDims{p.img.width, p.img.height};
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(p.img));
  if (!png_image_finish_read(&p.img, nullptr, buf.data(), 0, nullptr)) {
    throw Error(code, std::string("PNG decode failed: ") + p.img.message);
  }
  return buf;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Image decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> pixels;
  std::uint32_t w = 0;
  std::uint32_t h = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::ImageIo, std::string("JPEG decode failed: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  w = cinfo.output_width;
  h = cinfo.output_height;
  pixels.resize(std::size_t{w} * h * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + std::size_t{cinfo.output_scanline} * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return Image(ImageDims{w, h}, std::move(pixels));
}

}  // namespace

Bytes encode_png(const Image& img) {
  return write_png_memory(img.pixels().data(), img.width(), img.height(), PNG_FORMAT_RGB);
}

Bytes encode_mask_png(const BinaryMask& m) {
  std::vector<std::uint8_t> gray(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) gray[i] = m.get(i) ? 255 : 0;
  return write_png_memory(gray.data(), m.width(), m.height(), PNG_FORMAT_GRAY);
}

BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes) {
  if (!is_png(bytes)) {
    Error e(ErrorCode::Decode, "malformed mask payload at byte 0: missing PNG signature");
    e.offset = 0;
    throw e;
  }
  ImageDims dims;
  auto gray = read_png_memory(bytes, PNG_FORMAT_GRAY, dims, ErrorCode::Decode);
  BinaryMask m(dims);
  for (std::size_t i = 0; i < gray.size(); ++i) m.set(i, gray[i] != 0);
  return m;
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) {
    ImageDims dims;
    auto rgb = read_png_memory(bytes, PNG_FORMAT_RGB, dims, ErrorCode::ImageIo);
    return Image(dims, std::move(rgb));
  }
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw Error(ErrorCode::ImageIo, "unrecognized image format (expected PNG or JPEG)");
}

ImageDims png_dims(std::span<const std::uint8_t> bytes) {
  // Signature, IHDR length + tag, then big-endian width and height.
  if (!is_png(bytes) || bytes.size() < 24 || std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
    throw Error(ErrorCode::ImageIo, "not a PNG stream");
  }
  auto be32 = [&](std::size_t at) {
    return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
           (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
  };
  return ImageDims{be32(16), be32(20)};
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::ImageIo, fmt::format("cannot open '{}'", path.string()));
  }
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::ImageIo, fmt::format("cannot write '{}'", path.string()));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::ImageIo, fmt::format("write to '{}' failed", path.string()));
  }
}

Image read_image(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(ErrorCode::ImageIo, fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_png(const Image& img, const std::filesystem::path& path) {
  write_file(path, encode_png(img));
}

void write_mask_png(const BinaryMask& m, const std::filesystem::path& path) {
  write_file(path, encode_mask_png(m));
}

std::vector<std::uint8_t> read_png_indices(const std::filesystem::path& path, ImageDims& dims_out) {
  std::FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) throw Error(ErrorCode::ImageIo, fmt::format("cannot open '{}'", path.string()));
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::ImageIo, "libpng allocation failed");
  }
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::ImageIo, fmt::format("'{}' is not a readable PNG", path.string()));
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const auto w = png_get_image_width(png, info);
  const auto h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_PALETTE && color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::ImageIo,
                fmt::format("'{}' is not an indexed or grayscale PNG", path.string()));
  }
  if (depth < 8) png_set_packing(png);
  if (depth == 16) png_set_strip_16(png);
  png_read_update_info(png, info);
  out.resize(std::size_t{w} * h);
  for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, out.data() + std::size_t{y} * w, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  dims_out = ImageDims{w, h};
  return out;
}

}  // namespace coordseg
