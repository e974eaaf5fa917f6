// HTTP clients for the model-server wire protocol.

#include <chrono>
#include <memory>
#include <semaphore>

#include <fmt/format.h>
#include <httplib.h>

#include "coordseg/backends.hpp"
#include "coordseg/wire.hpp"

namespace coordseg {

namespace {

using nlohmann::json;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::Config, fmt::format("endpoint '{}' has no scheme", url));
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http") {
    throw Error(ErrorCode::Config, fmt::format("endpoint '{}': only http:// is supported", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    ep.prefix = url.substr(path_start);
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  }
  if (ep.origin.size() <= scheme_end + 3) {
    throw Error(ErrorCode::Config, fmt::format("endpoint '{}' has no host", url));
  }
  return ep;
}

std::string excerpt(const std::string& body, std::size_t limit = 200) {
  if (body.size() <= limit) return body;
  return body.substr(0, limit) + "...";
}

/// Shared transport: one POST with timeout, bounded retries on transport
/// failure and a cap on concurrent connections.
class JsonPoster {
 public:
  explicit JsonPoster(BackendConfig cfg)
      : cfg_(std::move(cfg)),
        endpoint_(split_endpoint(cfg_.endpoint)),
        slots_(std::make_unique<std::counting_semaphore<>>(cfg_.max_connections)) {
    cfg_.validate();
  }

  const BackendConfig& config() const noexcept { return cfg_; }

  json post(std::string_view path, const json& body) const {
    // Serialized once so every attempt sends identical bytes.
    const std::string payload = body.dump();
    const std::string target = endpoint_.prefix + std::string(path);

    slots_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{slots_.get()};

    Error last(ErrorCode::TransportFailure, "no attempt made");
    for (unsigned attempt = 0; attempt <= cfg_.retries; ++attempt) {
      httplib::Client client(endpoint_.origin);
      client.set_connection_timeout(cfg_.timeout);
      client.set_read_timeout(cfg_.timeout);
      client.set_write_timeout(cfg_.timeout);
      client.set_keep_alive(false);
      if (cfg_.auth_token) client.set_bearer_token_auth(*cfg_.auth_token);

      const auto started = std::chrono::steady_clock::now();
      auto res = client.Post(target, payload, "application/json");
      const auto elapsed = std::chrono::steady_clock::now() - started;

      if (res) return parse_response(*res, target);

      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed >= cfg_.timeout);
      last = timed_out
                 ? Error(ErrorCode::Timeout,
                         fmt::format("POST {}{} timed out after {} ms", endpoint_.origin, target,
                                     cfg_.timeout.count()))
                 : Error(ErrorCode::TransportFailure,
                         fmt::format("POST {}{} failed: {}", endpoint_.origin, target,
                                     httplib::to_string(err)));
    }
    throw last;
  }

 private:
  static json parse_response(const httplib::Response& res, const std::string& target) {
    json body;
    const bool parsed = [&] {
      try {
        body = json::parse(res.body);
        return true;
      } catch (const json::parse_error&) {
        return false;
      }
    }();
    if (res.status != 200) {
      std::string detail = excerpt(res.body);
      if (parsed && body.is_object() && body.contains("error") && body["error"].is_string()) {
        detail = body["error"].get<std::string>();
      }
      Error e(ErrorCode::NonSuccessStatus,
              fmt::format("{} returned HTTP {}: {}", target, res.status, detail));
      e.status = res.status;
      throw e;
    }
    if (!parsed) {
      throw Error(ErrorCode::Protocol,
                  fmt::format("{} returned a non-JSON body: {}", target, excerpt(res.body)));
    }
    return body;
  }

  BackendConfig cfg_;
  Endpoint endpoint_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

class HttpDetector final : public Detector {
 public:
  explicit HttpDetector(BackendConfig cfg) : poster_(std::move(cfg)) {}
  std::string describe() const override { return "http:" + poster_.config().endpoint; }

 protected:
  DetectorResponse do_detect(const DetectorRequest& req) const override {
    return wire::decode_detector_response(poster_.post(wire::kDetectPath, wire::encode(req)));
  }

 private:
  JsonPoster poster_;
};

class HttpSegmenter final : public Segmenter {
 public:
  explicit HttpSegmenter(BackendConfig cfg) : poster_(std::move(cfg)) {}
  std::string describe() const override { return "http:" + poster_.config().endpoint; }

 protected:
  SegmenterResponse do_segment(const SegmenterRequest& req) const override {
    return wire::decode_segmenter_response(poster_.post(wire::kSegmentPath, wire::encode(req)));
  }

 private:
  JsonPoster poster_;
};

}  // namespace

std::unique_ptr<Detector> make_http_detector(BackendConfig cfg) {
  return std::make_unique<HttpDetector>(std::move(cfg));
}

std::unique_ptr<Segmenter> make_http_segmenter(BackendConfig cfg) {
  return std::make_unique<HttpSegmenter>(std::move(cfg));
}

}  // namespace coordseg
