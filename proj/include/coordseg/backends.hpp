#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "coordseg/geometry.hpp"
#include "coordseg/imaging.hpp"

namespace coordseg {

struct EncodedImage {
  Bytes bytes;
  std::string format = "png";

  static EncodedImage png(const Image& img) { return {encode_png(img), "png"}; }
  ImageDims dims() const { return png_dims(bytes); }
  friend bool operator==(const EncodedImage&, const EncodedImage&) = default;
};

// `sample_id` on the requests is routing metadata for in-process mocks and
// logging; it never goes on the wire.

struct DetectorRequest {
  EncodedImage image;
  std::string prompt;
  std::string sample_id;
  friend bool operator==(const DetectorRequest&, const DetectorRequest&) = default;
};

struct DetectorResponse {
  std::string text;
  friend bool operator==(const DetectorResponse&, const DetectorResponse&) = default;
};

struct SegmenterRequest {
  EncodedImage image;
  PixelBox box;
  std::string sample_id;
  friend bool operator==(const SegmenterRequest&, const SegmenterRequest&) = default;
};

struct SegmenterResponse {
  BinaryMask mask;
  friend bool operator==(const SegmenterResponse&, const SegmenterResponse&) = default;
};

struct BackendConfig {
  std::string endpoint;
  std::chrono::milliseconds timeout{120000};
  unsigned retries = 1;
  std::optional<std::string> auth_token;
  unsigned max_connections = 4;

  /// Throws Config on an empty endpoint, non-positive timeout or zero
  /// connection limit.
  void validate() const;
};

/// Maps (image, prompt) to the model's raw text. Parsing is the caller's job.
class Detector {
 public:
  virtual ~Detector() = default;

  /// Checks request invariants, then forwards to the implementation.
  DetectorResponse detect(const DetectorRequest& req) const;
  virtual std::string describe() const = 0;

 protected:
  virtual DetectorResponse do_detect(const DetectorRequest& req) const = 0;
};

/// Maps (image, pixel box) to a binary mask with the image's dimensions.
class Segmenter {
 public:
  virtual ~Segmenter() = default;

  /// Checks that the box lies inside the image, forwards, and rejects a mask
  /// whose dims differ from the image (MaskDimensionMismatch).
  SegmenterResponse segment(const SegmenterRequest& req) const;
  virtual std::string describe() const = 0;

 protected:
  virtual SegmenterResponse do_segment(const SegmenterRequest& req) const = 0;
};

// ---------------------------------------------------------------------------
// Mocks
// ---------------------------------------------------------------------------

struct MockPerfect {};
struct MockJitter {
  double sigma = 0.0;
};
struct MockRefuse {};
using MockBehavior = std::variant<MockPerfect, MockJitter, MockRefuse>;

/// "perfect", "refuse" or "jitter:SIGMA".
MockBehavior parse_mock_behavior(const std::string& s);
std::string to_string(const MockBehavior& b);

inline constexpr std::string_view kRefusalText = "I cannot find the object.";

/// Ground truth per sample id, normalized.
using GroundTruthSource = std::map<std::string, NormBox>;

struct MockOptions {
  std::uint64_t seed = 0;
  std::chrono::milliseconds delay{0};
};

/// perfect: the sample's normalized gt box with 6 decimals.
/// jitter(s): gt plus N(0, s^2) per component from a generator seeded by
/// (seed, sample id), clamped to [0,1].
/// refuse: kRefusalText. Unknown sample ids also get kRefusalText.
std::unique_ptr<Detector> make_mock_detector(MockBehavior behavior, GroundTruthSource gt,
                                             MockOptions options = {});

/// Segmenter that fills the prompted box (box_to_mask).
std::unique_ptr<Segmenter> make_reference_segmenter(std::chrono::milliseconds delay = {});

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

/// POST {endpoint}/v1/detect. Retries transport failures (including
/// timeouts) up to `retries` extra times; never retries a response.
std::unique_ptr<Detector> make_http_detector(BackendConfig cfg);
/// POST {endpoint}/v1/segment.
std::unique_ptr<Segmenter> make_http_segmenter(BackendConfig cfg);

}  // namespace coordseg
