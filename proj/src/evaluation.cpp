#include "coordseg/evaluation.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "coordseg/extraction.hpp"

namespace coordseg {

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json grid_json(const std::optional<GridConfig>& g) {
  if (!g) return nullptr;
  return {{"cells_per_axis", g->cells_per_axis},
          {"opacity", g->opacity},
          {"line_width", g->line_width},
          {"line_color", g->line_color},
          {"draw_border", g->draw_border}};
}

/// Serializes results to the append-only results file as they complete.
class ResultSink {
 public:
  explicit ResultSink(const std::optional<std::filesystem::path>& path) {
    if (!path) return;
    out_.open(*path, std::ios::app);
    if (!out_) {
      throw Error(ErrorCode::ImageIo, fmt::format("cannot open results file '{}'", path->string()));
    }
  }

  void write(const PerSampleResult& r) {
    if (!out_.is_open()) return;
    const std::string line = to_json(r).dump();
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

}  // namespace

std::string to_string(FailurePolicy p) {
  return p == FailurePolicy::ScoreZero ? "score_zero" : "exclude";
}

FailurePolicy parse_failure_policy(const std::string& s) {
  if (s == "score_zero") return FailurePolicy::ScoreZero;
  if (s == "exclude") return FailurePolicy::Exclude;
  throw Error(ErrorCode::Config, "failure policy must be 'score_zero' or 'exclude', got '" + s + "'");
}

void EvalConfig::validate() const {
  if (parallelism < 1) throw Error(ErrorCode::Config, "parallelism must be >= 1");
  if (grid) grid->validate();
  (void)prompt_from_category("x", prompt_template);
}

json EvalConfig::echo(const Detector& det, const Segmenter& seg) const {
  json j = {
      {"method", method},
      {"dataset", dataset_name},
      {"grid", grid_json(grid)},
      {"grid_to_segmenter", grid_to_segmenter},
      {"clamp_mode", to_string(clamp_mode)},
      {"prompt_template", prompt_template},
      {"parallelism", parallelism},
      {"seed", seed},
      {"failure_policy", to_string(failure_policy)},
      {"detector", det.describe()},
      {"segmenter", seg.describe()},
  };
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

PerSampleResult evaluate_sample(const AnnotatedSample& s, const Detector& det,
                                const Segmenter& seg, const EvalConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  PerSampleResult r;
  r.sample_id = s.sample_id;
  std::string stage = "load";
  try {
    const Image img = read_image(s.image_path);
    if (img.dims() != s.dims) {
      throw Error(ErrorCode::ImageIo,
                  fmt::format("{} is {}x{} but its annotation says {}x{}", s.image_path.string(),
                              img.width(), img.height(), s.dims.width, s.dims.height));
    }
    const EncodedImage original = EncodedImage::png(img);
    const EncodedImage detector_input =
        cfg.grid ? EncodedImage::png(apply_grid_overlay(img, *cfg.grid)) : original;

    stage = "detect";
    const DetectorResponse answer = det.detect(
        {detector_input, prompt_from_category(s.category, cfg.prompt_template), s.sample_id});
    r.detector_text = answer.text;

    stage = "parse";
    const auto extracted = parse_coordinate_text(answer.text, s.dims, cfg.clamp_mode);
    const PixelBox predicted = to_raster(denormalize_box(extracted.box, s.dims), s.dims);
    r.predicted_box = predicted;

    stage = "segment";
    const SegmenterResponse masked =
        seg.segment({cfg.grid_to_segmenter ? detector_input : original, predicted, s.sample_id});

    stage = "metrics";
    r.metrics = metrics(predicted, s.gt_box);
    if (s.gt_mask) r.mask_iou = mask_iou(masked.mask, *s.gt_mask);
  } catch (const Error& e) {
    r.failure = SampleFailure{e.code(), stage, e.what()};
    r.metrics.reset();
    r.mask_iou.reset();
  } catch (const std::exception& e) {
    r.failure = SampleFailure{ErrorCode::Internal, stage, e.what()};
    r.metrics.reset();
    r.mask_iou.reset();
  }
  r.latency_s = seconds_since(t0);
  return r;
}

EvalReport aggregate(const std::vector<PerSampleResult>& results, const EvalConfig& cfg,
                     json config_echo) {
  EvalReport rep;
  rep.method = cfg.method;
  rep.dataset = cfg.dataset_name;
  rep.n_samples = results.size();
  rep.failure_policy = to_string(cfg.failure_policy);
  rep.config = std::move(config_echo);

  double iou_sum = 0.0, giou_sum = 0.0, ciou_sum = 0.0, latency_sum = 0.0;
  for (const auto& r : results) {
    latency_sum += r.latency_s;
    if (r.metrics) {
      iou_sum += r.metrics->iou;
      giou_sum += r.metrics->giou;
      ciou_sum += r.metrics->ciou;
    } else {
      ++rep.n_failures;
    }
  }
  const std::size_t denom = cfg.failure_policy == FailurePolicy::ScoreZero
                                ? rep.n_samples
                                : rep.n_samples - rep.n_failures;
  if (denom > 0) {
    rep.mean_iou = iou_sum / static_cast<double>(denom);
    rep.mean_giou = giou_sum / static_cast<double>(denom);
    rep.mean_ciou = ciou_sum / static_cast<double>(denom);
  }
  if (rep.n_samples > 0) rep.ait_s = latency_sum / static_cast<double>(rep.n_samples);
  return rep;
}

EvalReport run_eval(const DatasetSlice& slice, const Detector& det, const Segmenter& seg,
                    const EvalConfig& cfg, std::vector<PerSampleResult>* results_out) {
  cfg.validate();
  if (slice.empty()) throw Error(ErrorCode::EmptySlice, "cannot evaluate an empty dataset slice");

  std::vector<PerSampleResult> results(slice.size());
  ResultSink sink(cfg.results_path);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < slice.size(); i = next++) {
      results[i] = evaluate_sample(slice.samples[i], det, seg, cfg);
      sink.write(results[i]);
    }
  };

  const std::size_t workers = std::min<std::size_t>(cfg.parallelism, slice.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  EvalReport rep = aggregate(results, cfg, cfg.echo(det, seg));
  if (results_out) *results_out = std::move(results);
  return rep;
}

GroundTruthSource ground_truth_of(const DatasetSlice& slice) {
  GroundTruthSource gt;
  for (const auto& s : slice.samples) gt.emplace(s.sample_id, normalize_box(s.gt_box, s.dims));
  return gt;
}

json to_json(const PerSampleResult& r) {
  json j;
  j["sample_id"] = r.sample_id;
  j["detector_text"] = r.detector_text ? json(*r.detector_text) : json(nullptr);
  j["predicted_box"] = r.predicted_box ? json(r.predicted_box->corners()) : json(nullptr);
  j["metrics"] = r.metrics ? json{{"iou", r.metrics->iou},
                                  {"giou", r.metrics->giou},
                                  {"ciou", r.metrics->ciou}}
                           : json(nullptr);
  j["mask_iou"] = r.mask_iou ? json(*r.mask_iou) : json(nullptr);
  j["latency_s"] = r.latency_s;
  j["failure"] = r.failure ? json{{"code", to_string(r.failure->code)},
                                  {"stage", r.failure->stage},
                                  {"message", r.failure->message}}
                           : json(nullptr);
  return j;
}

PerSampleResult per_sample_result_from_json(const json& j) {
  try {
    PerSampleResult r;
    r.sample_id = j.at("sample_id").get<std::string>();
    if (!j.at("detector_text").is_null()) r.detector_text = j["detector_text"].get<std::string>();
    if (!j.at("predicted_box").is_null()) {
      const auto c = j["predicted_box"].get<std::array<double, 4>>();
      r.predicted_box = PixelBox{c[0], c[1], c[2], c[3]};
    }
    if (!j.at("metrics").is_null()) {
      const auto& m = j["metrics"];
      r.metrics = MetricTriple{m.at("iou").get<double>(), m.at("giou").get<double>(),
                               m.at("ciou").get<double>()};
    }
    if (!j.at("mask_iou").is_null()) r.mask_iou = j["mask_iou"].get<double>();
    r.latency_s = j.at("latency_s").get<double>();
    if (!j.at("failure").is_null()) {
      const auto& f = j["failure"];
      const auto name = f.at("code").get<std::string>();
      r.failure = SampleFailure{parse_error_code(name).value_or(ErrorCode::Internal),
                                f.at("stage").get<std::string>(),
                                f.at("message").get<std::string>()};
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Malformed, fmt::format("bad result record: {}", e.what()));
  }
}

}  // namespace coordseg
