#include <doctest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "coordseg/backends.hpp"
#include "coordseg/extraction.hpp"
#include "coordseg/wire.hpp"

using namespace coordseg;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

/// In-process stub model server on an ephemeral port.
class StubServer {
 public:
  StubServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

EncodedImage test_image(std::uint32_t w = 8, std::uint32_t h = 6) {
  return EncodedImage::png(Image(ImageDims{w, h}, 100));
}

BackendConfig config_for(const std::string& url, std::chrono::milliseconds timeout = 2000ms,
                         unsigned retries = 0) {
  BackendConfig cfg;
  cfg.endpoint = url;
  cfg.timeout = timeout;
  cfg.retries = retries;
  return cfg;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected coordseg::Error");
  return ErrorCode::Internal;
}

/// A loopback port that was free a moment ago and is now closed.
int unused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace

TEST_SUITE("backends") {

TEST_CASE("mock behavior strings") {
  CHECK(std::holds_alternative<MockPerfect>(parse_mock_behavior("perfect")));
  CHECK(std::holds_alternative<MockRefuse>(parse_mock_behavior("refuse")));
  const auto j = parse_mock_behavior("jitter:0.02");
  REQUIRE(std::holds_alternative<MockJitter>(j));
  CHECK(std::get<MockJitter>(j).sigma == 0.02);
  CHECK(to_string(j) == "jitter:0.02");
  CHECK(code_of([] { parse_mock_behavior("jitter:-1"); }) == ErrorCode::Config);
  CHECK(code_of([] { parse_mock_behavior("jitter:"); }) == ErrorCode::Config);
  CHECK(code_of([] { parse_mock_behavior("oracle"); }) == ErrorCode::Config);
}

TEST_CASE("perfect mock echoes ground truth, unknown ids are refused") {
  const NormBox gt{0.1, 0.3, 0.3, 0.5};
  const auto det = make_mock_detector(MockPerfect{}, {{"a", gt}});
  const auto r = det->detect({test_image(), "find it", "a"});
  CHECK(parse_coordinate_text(r.text).box == gt);
  CHECK(det->detect({test_image(), "find it", "zzz"}).text == kRefusalText);

  const auto refuse = make_mock_detector(MockRefuse{}, {{"a", gt}});
  CHECK(refuse->detect({test_image(), "find it", "a"}).text == kRefusalText);
}

TEST_CASE("jitter mock is deterministic per (seed, sample id)") {
  const GroundTruthSource gt{{"a", NormBox{0.2, 0.2, 0.6, 0.7}}, {"b", NormBox{0.2, 0.2, 0.6, 0.7}}};
  const auto d1 = make_mock_detector(MockJitter{0.05}, gt, {.seed = 7});
  const auto d2 = make_mock_detector(MockJitter{0.05}, gt, {.seed = 7});
  const auto d3 = make_mock_detector(MockJitter{0.05}, gt, {.seed = 8});
  const DetectorRequest ra{test_image(), "p", "a"}, rb{test_image(), "p", "b"};
  CHECK(d1->detect(ra) == d2->detect(ra));
  CHECK(d1->detect(ra) == d1->detect(ra));  // no hidden state across calls
  CHECK(d1->detect(ra) != d3->detect(ra));
  CHECK(d1->detect(ra) != d1->detect(rb));

  const auto zero = make_mock_detector(MockJitter{0.0}, gt);
  CHECK(parse_coordinate_text(zero->detect(ra).text).box == gt.at("a"));
}

TEST_CASE("detector and segmenter request checks") {
  const auto det = make_mock_detector(MockPerfect{}, {});
  CHECK(code_of([&] { det->detect({test_image(), "", "a"}); }) == ErrorCode::Config);
  CHECK(code_of([&] { det->detect({EncodedImage{}, "p", "a"}); }) == ErrorCode::Config);

  const auto seg = make_reference_segmenter();
  const auto m = seg->segment({test_image(8, 6), PixelBox{1, 1, 4, 3}, "a"});
  CHECK(m.mask.dims() == ImageDims{8, 6});
  CHECK(m.mask.popcount() == 6);
  CHECK(code_of([&] { seg->segment({test_image(8, 6), PixelBox{1, 1, 9, 3}, "a"}); }) ==
        ErrorCode::OutOfBounds);
}

TEST_CASE("wire round trips") {
  const Bytes bytes{0, 1, 2, 250, 255, 128, 7};
  for (std::size_t n = 0; n <= bytes.size(); ++n) {
    const Bytes part(bytes.begin(), bytes.begin() + n);
    CHECK(wire::base64_decode(wire::base64_encode(part)) == part);
  }
  CHECK(wire::base64_encode(Bytes{'M', 'a', 'n'}) == "TWFu");
  CHECK(code_of([] { wire::base64_decode("abc"); }) == ErrorCode::Protocol);
  CHECK(code_of([] { wire::base64_decode("a$=="); }) == ErrorCode::Protocol);

  const DetectorRequest dreq{test_image(), "find the car", "not-sent"};
  const json dj = wire::encode(dreq);
  CHECK_FALSE(dj.contains("sample_id"));
  CHECK(dj.at("image_format") == "png");
  const DetectorRequest dback = wire::decode_detector_request(dj);
  CHECK(dback.image == dreq.image);
  CHECK(dback.prompt == dreq.prompt);

  CHECK(wire::decode_detector_response(wire::encode(DetectorResponse{"[0.1,0.2,0.3,0.4]"})).text ==
        "[0.1,0.2,0.3,0.4]");

  const SegmenterRequest sreq{test_image(), PixelBox{1, 2, 5, 6}, ""};
  const json sj = wire::encode(sreq);
  CHECK(sj.at("box") == json::array({1, 2, 5, 6}));
  CHECK(wire::decode_segmenter_request(sj).box == sreq.box);
  CHECK(code_of([] { wire::encode(SegmenterRequest{test_image(), PixelBox{1.5, 2, 5, 6}, ""}); }) ==
        ErrorCode::Protocol);

  BinaryMask mask(ImageDims{8, 6});
  mask.set(std::uint32_t{3}, std::uint32_t{2}, true);
  for (MaskFormat f : {MaskFormat::Rle, MaskFormat::Png}) {
    const json mj = wire::encode(SegmenterResponse{mask}, f);
    CHECK(mj.at("mask_format") == to_string(f));
    CHECK(wire::decode_segmenter_response(mj).mask == mask);
  }
}

TEST_CASE("wire decoders name the offending field") {
  auto message_of = [](auto&& fn) -> std::string {
    try {
      fn();
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Protocol);
      return e.what();
    }
    FAIL("expected Protocol");
    return {};
  };
  CHECK(message_of([] { wire::decode_detector_response(json::object()); }).find("text") !=
        std::string::npos);
  CHECK(message_of([] { wire::decode_detector_response(json{{"text", 3}}); }).find("text") !=
        std::string::npos);
  CHECK(message_of([] {
          wire::decode_segmenter_response(json{{"mask_format", "bmp"}, {"mask_b64", ""}});
        }).find("mask_format") != std::string::npos);
  CHECK(message_of([] { wire::decode_segmenter_request(json{{"image_b64", ""}, {"image_format", "png"}}); })
            .find("box") != std::string::npos);
}

TEST_CASE("http detector and segmenter against a stub server") {
  StubServer stub;
  std::string seen_auth;
  stub.server().Post(std::string(wire::kDetectPath), [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    const auto body = wire::decode_detector_request(json::parse(req.body));
    res.set_content(wire::encode(DetectorResponse{"prompt was: " + body.prompt}).dump(), "application/json");
  });
  stub.server().Post(std::string(wire::kSegmentPath), [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = wire::decode_segmenter_request(json::parse(req.body));
    const auto mask = box_to_mask(body.box, body.image.dims());
    res.set_content(wire::encode(SegmenterResponse{mask}).dump(), "application/json");
  });

  BackendConfig cfg = config_for(stub.url());
  cfg.auth_token = "s3cret";
  const auto det = make_http_detector(cfg);
  CHECK(det->detect({test_image(), "hello", "x"}).text == "prompt was: hello");
  CHECK(seen_auth == "Bearer s3cret");
  CHECK(det->describe() == "http:" + stub.url());

  const auto seg = make_http_segmenter(config_for(stub.url() + "/"));
  const auto m = seg->segment({test_image(8, 6), PixelBox{1, 1, 4, 3}, "x"});
  CHECK(m.mask == box_to_mask(PixelBox{1, 1, 4, 3}, ImageDims{8, 6}));
}

TEST_CASE("http path prefix is honoured") {
  StubServer stub;
  stub.server().Post("/api/v1/detect", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"text": "ok"})", "application/json");
  });
  CHECK(make_http_detector(config_for(stub.url() + "/api"))->detect({test_image(), "p", ""}).text == "ok");
}

TEST_CASE("http failure modes") {
  StubServer stub;
  std::atomic<int> slow_calls{0};
  stub.server().Post("/slow/v1/detect", [&](const httplib::Request&, httplib::Response& res) {
    ++slow_calls;
    std::this_thread::sleep_for(300ms);
    res.set_content(R"({"text": "late"})", "application/json");
  });
  stub.server().Post("/busy/v1/detect", [](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content(R"({"error": "model loading"})", "application/json");
  });
  stub.server().Post("/garbage/v1/detect", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("<html>", "text/html");
  });
  stub.server().Post("/badmask/v1/segment", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(wire::encode(SegmenterResponse{BinaryMask(ImageDims{3, 3})}).dump(), "application/json");
  });

  SUBCASE("timeout") {
    const auto det = make_http_detector(config_for(stub.url() + "/slow", 50ms));
    CHECK(code_of([&] { det->detect({test_image(), "p", ""}); }) == ErrorCode::Timeout);
    CHECK(slow_calls == 1);
  }
  SUBCASE("timeouts are retried") {
    const auto det = make_http_detector(config_for(stub.url() + "/slow", 50ms, 2));
    CHECK(code_of([&] { det->detect({test_image(), "p", ""}); }) == ErrorCode::Timeout);
    CHECK(slow_calls == 3);
  }
  SUBCASE("non-success status is not retried and carries the server message") {
    const auto det = make_http_detector(config_for(stub.url() + "/busy", 2000ms, 3));
    try {
      det->detect({test_image(), "p", ""});
      FAIL("expected NonSuccessStatus");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonSuccessStatus);
      CHECK(e.status == 503);
      CHECK(std::string(e.what()).find("model loading") != std::string::npos);
    }
  }
  SUBCASE("non-json 200") {
    CHECK(code_of([&] { make_http_detector(config_for(stub.url() + "/garbage"))->detect({test_image(), "p", ""}); }) ==
          ErrorCode::Protocol);
  }
  SUBCASE("mask dims must match the image") {
    const auto seg = make_http_segmenter(config_for(stub.url() + "/badmask"));
    CHECK(code_of([&] { seg->segment({test_image(8, 6), PixelBox{0, 0, 2, 2}, ""}); }) ==
          ErrorCode::MaskDimensionMismatch);
  }
}

TEST_CASE("a retry after a timeout resends the identical payload") {
  StubServer stub;
  std::mutex mu;
  std::vector<std::string> bodies;
  stub.server().Post(std::string(wire::kDetectPath), [&](const httplib::Request& req, httplib::Response& res) {
    std::size_t n;
    {
      std::lock_guard lock(mu);
      bodies.push_back(req.body);
      n = bodies.size();
    }
    if (n == 1) std::this_thread::sleep_for(300ms);
    res.set_content(R"({"text": "second try"})", "application/json");
  });
  const auto det = make_http_detector(config_for(stub.url(), 100ms, 1));
  CHECK(det->detect({test_image(), "p", ""}).text == "second try");
  std::lock_guard lock(mu);
  REQUIRE(bodies.size() == 2);
  CHECK(bodies[0] == bodies[1]);
}

TEST_CASE("connection refused is a transport failure") {
  const int port = unused_port();
  const auto det = make_http_detector(config_for("http://127.0.0.1:" + std::to_string(port), 500ms, 1));
  CHECK(code_of([&] { det->detect({test_image(), "p", ""}); }) == ErrorCode::TransportFailure);
}

TEST_CASE("backend config validation") {
  CHECK(code_of([] { make_http_detector(config_for("")); }) == ErrorCode::Config);
  CHECK(code_of([] { make_http_detector(config_for("https://example.com")); }) == ErrorCode::Config);
  CHECK(code_of([] { make_http_detector(config_for("http://")); }) == ErrorCode::Config);
  CHECK(code_of([] { make_http_detector(config_for("http://localhost:1", 0ms)); }) == ErrorCode::Config);
}

}  // TEST_SUITE
