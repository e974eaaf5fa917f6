#include "coordseg/wire.hpp"

#include <cmath>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace coordseg::wire {

using nlohmann::json;

namespace {

Error protocol_error(const std::string& what) { return Error(ErrorCode::Protocol, what); }

const json& field(const json& j, const char* key, json::value_t type, std::string_view what) {
  if (!j.is_object()) throw protocol_error(fmt::format("{} body is not a JSON object", what));
  auto it = j.find(key);
  if (it == j.end()) throw protocol_error(fmt::format("{} is missing '{}'", what, key));
  const bool ok = type == json::value_t::number_integer
                      ? it->is_number_integer()
                      : it->type() == type;
  if (!ok) throw protocol_error(fmt::format("{} field '{}' has the wrong type", what, key));
  return *it;
}

EncodedImage decode_image_fields(const json& j, std::string_view what) {
  EncodedImage img;
  img.format = field(j, "image_format", json::value_t::string, what).get<std::string>();
  if (img.format != "png") {
    throw protocol_error(fmt::format("{} image_format '{}' unsupported", what, img.format));
  }
  img.bytes = base64_decode(field(j, "image_b64", json::value_t::string, what).get<std::string>());
  return img;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  if (bytes.empty()) return out;
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw protocol_error(fmt::format("base64 length {} is not a multiple of 4", text.size()));
  }
  if (text.empty()) return {};
  Bytes out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw protocol_error("invalid base64 payload");
  std::size_t padding = 0;
  if (text.back() == '=') ++padding;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

json encode(const DetectorRequest& req) {
  return {{"image_b64", base64_encode(req.image.bytes)},
          {"image_format", req.image.format},
          {"prompt", req.prompt}};
}

json encode(const DetectorResponse& resp) { return {{"text", resp.text}}; }

json encode(const SegmenterRequest& req) {
  json box = json::array();
  for (double c : req.box.corners()) {
    if (c != std::floor(c)) {
      throw protocol_error(fmt::format("segmenter box corner {} is not an integer", c));
    }
    box.push_back(static_cast<std::int64_t>(c));
  }
  return {{"image_b64", base64_encode(req.image.bytes)},
          {"image_format", req.image.format},
          {"box", box}};
}

json encode(const SegmenterResponse& resp, MaskFormat format) {
  return {{"mask_format", to_string(format)},
          {"mask_b64", base64_encode(encode_mask(resp.mask, format))}};
}

json encode_error(std::string_view message) { return {{"error", message}}; }

DetectorRequest decode_detector_request(const json& j) {
  DetectorRequest req;
  req.image = decode_image_fields(j, "detect request");
  req.prompt = field(j, "prompt", json::value_t::string, "detect request").get<std::string>();
  return req;
}

DetectorResponse decode_detector_response(const json& j) {
  return {field(j, "text", json::value_t::string, "detect response").get<std::string>()};
}

SegmenterRequest decode_segmenter_request(const json& j) {
  auto image = decode_image_fields(j, "segment request");
  const auto& box = field(j, "box", json::value_t::array, "segment request");
  if (box.size() != 4 || !std::all_of(box.begin(), box.end(),
                                      [](const json& v) { return v.is_number_integer(); })) {
    throw protocol_error("segment request 'box' must be four integers");
  }
  try {
    PixelBox b{box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
               box[3].get<double>()};
    return {std::move(image), b, {}};
  } catch (const Error& e) {
    throw protocol_error(fmt::format("segment request 'box': {}", e.what()));
  }
}

SegmenterResponse decode_segmenter_response(const json& j) {
  const auto format_name =
      field(j, "mask_format", json::value_t::string, "segment response").get<std::string>();
  MaskFormat format;
  try {
    format = parse_mask_format(format_name);
  } catch (const Error&) {
    throw protocol_error(fmt::format("segment response mask_format '{}' unsupported", format_name));
  }
  const auto bytes =
      base64_decode(field(j, "mask_b64", json::value_t::string, "segment response").get<std::string>());
  return {decode_mask(bytes, format)};
}

}  // namespace coordseg::wire
