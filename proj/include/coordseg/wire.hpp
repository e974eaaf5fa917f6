#pragma once

#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "coordseg/backends.hpp"

namespace coordseg::wire {

// JSON bodies of the model-server protocol. Field names are fixed:
//   /v1/detect  request  {"image_b64", "image_format", "prompt"}
//               response {"text"}
//   /v1/segment request  {"image_b64", "image_format", "box": [x1,y1,x2,y2]}
//               response {"mask_format": "rle"|"png", "mask_b64"}
//   errors      {"error"}

inline constexpr std::string_view kDetectPath = "/v1/detect";
inline constexpr std::string_view kSegmentPath = "/v1/segment";
inline constexpr std::string_view kHealthPath = "/v1/health";

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws Protocol on invalid input.
Bytes base64_decode(std::string_view text);

nlohmann::json encode(const DetectorRequest& req);
nlohmann::json encode(const DetectorResponse& resp);
/// The box is sent as integers; callers rasterize first (to_raster).
nlohmann::json encode(const SegmenterRequest& req);
nlohmann::json encode(const SegmenterResponse& resp, MaskFormat format = MaskFormat::Rle);
nlohmann::json encode_error(std::string_view message);

// Decoders throw Protocol naming the missing or mistyped field.
DetectorRequest decode_detector_request(const nlohmann::json& j);
DetectorResponse decode_detector_response(const nlohmann::json& j);
SegmenterRequest decode_segmenter_request(const nlohmann::json& j);
SegmenterResponse decode_segmenter_response(const nlohmann::json& j);

}  // namespace coordseg::wire
