#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coordseg/backends.hpp"
#include "coordseg/datasets.hpp"
#include "coordseg/geometry.hpp"
#include "coordseg/imaging.hpp"

namespace coordseg {

/// How failed samples enter the metric means. AIT always covers every sample.
enum class FailurePolicy {
  ScoreZero,  ///< failures score 0 on all three metrics and stay in the denominator
  Exclude,    ///< means over successful samples only
};

std::string to_string(FailurePolicy p);
FailurePolicy parse_failure_policy(const std::string& s);

struct EvalConfig {
  std::string method = "coordseg";
  std::string dataset_name;
  std::optional<GridConfig> grid;
  /// Feed the overlaid image to the segmenter too (default: original image).
  bool grid_to_segmenter = false;
  ClampMode clamp_mode = ClampMode::Strict;
  std::string prompt_template{kDefaultPromptTemplate};
  unsigned parallelism = 1;
  std::uint64_t seed = 0;
  FailurePolicy failure_policy = FailurePolicy::ScoreZero;
  /// Append-only JSON-lines file receiving each result as it completes.
  std::optional<std::filesystem::path> results_path;
  /// Free-form extras recorded in the report's config echo (subset size,
  /// backend endpoints, ...).
  nlohmann::json extra = nlohmann::json::object();

  void validate() const;
  /// Deterministic description of the run for the report.
  nlohmann::json echo(const Detector& det, const Segmenter& seg) const;
};

struct SampleFailure {
  ErrorCode code;
  std::string stage;  ///< load, detect, parse, segment, metrics
  std::string message;
  friend bool operator==(const SampleFailure&, const SampleFailure&) = default;
};

struct PerSampleResult {
  std::string sample_id;
  std::optional<std::string> detector_text;
  /// Integer pixel box sent to the segmenter and scored against the gt box.
  std::optional<PixelBox> predicted_box;
  std::optional<MetricTriple> metrics;
  /// Predicted mask vs ground-truth mask, when the sample carries one.
  std::optional<double> mask_iou;
  double latency_s = 0.0;
  std::optional<SampleFailure> failure;
};

struct EvalReport {
  std::string method;
  std::string dataset;
  std::size_t n_samples = 0;
  std::size_t n_failures = 0;
  double mean_iou = 0.0;
  double mean_giou = 0.0;
  double mean_ciou = 0.0;
  double ait_s = 0.0;
  std::string failure_policy = "score_zero";
  nlohmann::json config = nlohmann::json::object();

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// load -> (grid for detector) -> detect -> parse/validate -> denormalize ->
/// rasterize -> segment -> metrics. Never throws for per-sample problems:
/// they land in `failure`. Latency spans load through metrics.
PerSampleResult evaluate_sample(const AnnotatedSample& s, const Detector& det,
                                const Segmenter& seg, const EvalConfig& cfg);

/// Evaluates every sample with at most cfg.parallelism in flight and folds
/// the results in slice order. Throws EmptySlice on an empty slice.
EvalReport run_eval(const DatasetSlice& slice, const Detector& det, const Segmenter& seg,
                    const EvalConfig& cfg, std::vector<PerSampleResult>* results_out = nullptr);

/// The aggregation fold used by run_eval. `results` must be in slice order.
EvalReport aggregate(const std::vector<PerSampleResult>& results, const EvalConfig& cfg,
                     nlohmann::json config_echo);

/// Ground truth for the mock detector, keyed by sample id.
GroundTruthSource ground_truth_of(const DatasetSlice& slice);

nlohmann::json to_json(const PerSampleResult& r);
PerSampleResult per_sample_result_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportFormat { Table, Json, Csv };

ReportFormat parse_report_format(const std::string& s);

inline constexpr std::string_view kCsvHeader = "method,dataset,n,iou,giou,ciou,ait_s,failures";

/// table: Method | IoU | GIoU | CIoU | AIT(s), 4-decimal metrics, whole-second
/// AIT. json and csv carry full precision.
std::string emit_report(const EvalReport& r, ReportFormat format);
/// Inverse of the json format. Throws Malformed.
EvalReport parse_report_json(std::string_view text);

}  // namespace coordseg
