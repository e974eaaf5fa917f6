#include "coordseg/backends.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "coordseg/extraction.hpp"

namespace coordseg {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void sleep_for(std::chrono::milliseconds d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

class MockDetector final : public Detector {
 public:
  MockDetector(MockBehavior behavior, GroundTruthSource gt, MockOptions options)
      : behavior_(behavior), gt_(std::move(gt)), options_(options) {
    if (const auto* j = std::get_if<MockJitter>(&behavior_); j && !(j->sigma >= 0.0)) {
      throw Error(ErrorCode::Config, fmt::format("jitter sigma must be >= 0, got {}", j->sigma));
    }
  }

  std::string describe() const override { return "mock:" + to_string(behavior_); }

 protected:
  DetectorResponse do_detect(const DetectorRequest& req) const override {
    sleep_for(options_.delay);
    if (std::holds_alternative<MockRefuse>(behavior_)) return {std::string(kRefusalText)};
    auto it = gt_.find(req.sample_id);
    if (it == gt_.end()) return {std::string(kRefusalText)};
    const NormBox& truth = it->second;

    if (const auto* jitter = std::get_if<MockJitter>(&behavior_); jitter && jitter->sigma > 0.0) {
      std::seed_seq seq{static_cast<std::uint32_t>(options_.seed),
                        static_cast<std::uint32_t>(options_.seed >> 32),
                        static_cast<std::uint32_t>(fnv1a(req.sample_id)),
                        static_cast<std::uint32_t>(fnv1a(req.sample_id) >> 32)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> noise(0.0, jitter->sigma);
      std::array<double, 4> c = truth.corners();
      for (double& v : c) v = std::clamp(v + noise(rng), 0.0, 1.0);
      // Jitter may collapse or invert the box; the text is emitted as-is and
      // validation downstream decides.
      return {fmt::format("[{:.6f},{:.6f},{:.6f},{:.6f}]", c[0], c[1], c[2], c[3])};
    }
    return {format_norm_box(truth, 6)};
  }

 private:
  MockBehavior behavior_;
  GroundTruthSource gt_;
  MockOptions options_;
};

class ReferenceSegmenter final : public Segmenter {
 public:
  explicit ReferenceSegmenter(std::chrono::milliseconds delay) : delay_(delay) {}
  std::string describe() const override { return "reference"; }

 protected:
  SegmenterResponse do_segment(const SegmenterRequest& req) const override {
    sleep_for(delay_);
    return {box_to_mask(req.box, req.image.dims())};
  }

 private:
  std::chrono::milliseconds delay_;
};

}  // namespace

void BackendConfig::validate() const {
  if (endpoint.empty()) throw Error(ErrorCode::Config, "backend endpoint is empty");
  if (timeout.count() <= 0) {
    throw Error(ErrorCode::Config, fmt::format("backend timeout must be > 0 ms, got {}", timeout.count()));
  }
  if (max_connections == 0) throw Error(ErrorCode::Config, "backend max_connections must be >= 1");
}

DetectorResponse Detector::detect(const DetectorRequest& req) const {
  if (req.image.bytes.empty()) throw Error(ErrorCode::Config, "detector request has no image bytes");
  if (req.prompt.empty()) throw Error(ErrorCode::Config, "detector request has an empty prompt");
  return do_detect(req);
}

SegmenterResponse Segmenter::segment(const SegmenterRequest& req) const {
  const ImageDims dims = req.image.dims();
  req.box.require_within(dims);
  auto resp = do_segment(req);
  if (resp.mask.dims() != dims) {
    throw Error(ErrorCode::MaskDimensionMismatch,
                fmt::format("segmenter returned a {}x{} mask for a {}x{} image", resp.mask.width(),
                            resp.mask.height(), dims.width, dims.height));
  }
  return resp;
}

MockBehavior parse_mock_behavior(const std::string& s) {
  if (s == "perfect") return MockPerfect{};
  if (s == "refuse") return MockRefuse{};
  constexpr std::string_view kJitter = "jitter:";
  if (s.starts_with(kJitter)) {
    const std::string number = s.substr(kJitter.size());
    std::size_t used = 0;
    double sigma = -1.0;
    try {
      sigma = std::stod(number, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != number.size() || number.empty() || !(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw Error(ErrorCode::Config, fmt::format("bad jitter sigma in '{}'", s));
    }
    return MockJitter{sigma};
  }
  throw Error(ErrorCode::Config,
              fmt::format("mock behavior must be perfect, refuse or jitter:SIGMA, got '{}'", s));
}

std::string to_string(const MockBehavior& b) {
  if (std::holds_alternative<MockPerfect>(b)) return "perfect";
  if (std::holds_alternative<MockRefuse>(b)) return "refuse";
  return fmt::format("jitter:{}", std::get<MockJitter>(b).sigma);
}

std::unique_ptr<Detector> make_mock_detector(MockBehavior behavior, GroundTruthSource gt,
                                             MockOptions options) {
  return std::make_unique<MockDetector>(behavior, std::move(gt), options);
}

std::unique_ptr<Segmenter> make_reference_segmenter(std::chrono::milliseconds delay) {
  return std::make_unique<ReferenceSegmenter>(delay);
}

}  // namespace coordseg
