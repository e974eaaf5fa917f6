#include "cli.hpp"

#include <filesystem>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "coordseg/backends.hpp"
#include "coordseg/datasets.hpp"
#include "coordseg/evaluation.hpp"
#include "coordseg/extraction.hpp"
#include "coordseg/geometry.hpp"
#include "coordseg/imaging.hpp"

namespace coordseg::cli {

namespace fs = std::filesystem;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::InvalidDims:
    case ErrorCode::PixelValuesWithoutDims:
      return kConfigError;
    case ErrorCode::NoQuadrupleFound:
      return kParseNotFound;
    default:
      return kRuntimeFailure;
  }
}

std::vector<double> split_reals(const std::string& text, char sep) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    // Allow surrounding whitespace only.
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos) {
      throw Error(ErrorCode::Config, fmt::format("'{}' is not a number in '{}'", item, text));
    }
    out.push_back(v);
  }
  return out;
}

PixelBox parse_box_flag(const std::string& text) {
  const auto v = split_reals(text, ',');
  if (v.size() != 4) {
    throw Error(ErrorCode::Config, fmt::format("box '{}' needs four comma-separated values", text));
  }
  try {
    return PixelBox{v[0], v[1], v[2], v[3]};
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, fmt::format("box '{}': {}", text, e.what()));
  }
}

ImageDims parse_dims_flag(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) {
    throw Error(ErrorCode::Config, fmt::format("dims '{}' must look like WIDTHxHEIGHT", text));
  }
  const auto w = split_reals(text.substr(0, x), ',');
  const auto h = split_reals(text.substr(x + 1), ',');
  if (w.size() != 1 || h.size() != 1 || w[0] < 1 || h[0] < 1 || w[0] != std::floor(w[0]) ||
      h[0] != std::floor(h[0]) || w[0] > 4294967295.0 || h[0] > 4294967295.0) {
    throw Error(ErrorCode::Config, fmt::format("dims '{}' must be positive integers", text));
  }
  return ImageDims{static_cast<std::uint32_t>(w[0]), static_cast<std::uint32_t>(h[0])};
}

std::array<std::uint8_t, 3> parse_color_flag(const std::string& text) {
  const auto v = split_reals(text, ',');
  if (v.size() != 3) throw Error(ErrorCode::Config, fmt::format("color '{}' needs R,G,B", text));
  std::array<std::uint8_t, 3> c{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (v[i] < 0 || v[i] > 255 || v[i] != std::floor(v[i])) {
      throw Error(ErrorCode::Config, fmt::format("color '{}' components must be 0..255", text));
    }
    c[i] = static_cast<std::uint8_t>(v[i]);
  }
  return c;
}

struct SharedOptions {
  std::uint64_t seed = 0;
  std::string output = "coordseg-out";
};

struct DatasetOptions {
  std::string dataset;
  std::string annotations;
  std::string root;
  std::string split = "val";
  std::vector<std::string> categories;
  std::optional<std::size_t> subset;
};

void add_dataset_options(CLI::App& cmd, DatasetOptions& o) {
  cmd.add_option("--dataset", o.dataset, "Annotation format")
      ->check(CLI::IsMember({"coco", "voc"}))
      ->required();
  cmd.add_option("--annotations", o.annotations, "COCO instances JSON file");
  cmd.add_option("--root", o.root, "COCO image root or VOC devkit root");
  cmd.add_option("--split", o.split, "VOC split list name (ImageSets/Main/<split>.txt)")
      ->capture_default_str();
  cmd.add_option("--categories", o.categories, "Only keep these category names")->delimiter(',');
  cmd.add_option("--subset", o.subset, "Seeded random subset of N samples");
}

DatasetSlice load_dataset(const DatasetOptions& o, std::uint64_t seed) {
  CategoryFilter filter;
  if (!o.categories.empty()) filter.emplace(o.categories.begin(), o.categories.end());
  DatasetSlice slice;
  if (o.dataset == "coco") {
    if (o.annotations.empty()) throw Error(ErrorCode::Config, "--annotations is required for coco");
    const fs::path images = o.root.empty() ? fs::path(o.annotations).parent_path() : fs::path(o.root);
    slice = load_coco(o.annotations, images, filter);
  } else {
    if (o.root.empty()) throw Error(ErrorCode::Config, "--root is required for voc");
    slice = load_voc(o.root, o.split, filter);
  }
  slice.seed = seed;
  if (o.subset) {
    if (*o.subset > slice.size()) {
      throw Error(ErrorCode::Config,
                  fmt::format("--subset {} exceeds the {} loaded samples", *o.subset, slice.size()));
    }
    slice = sample_subset(slice, *o.subset, seed);
  }
  return slice;
}

struct EvalOptions {
  DatasetOptions data;
  std::string mock;
  std::string detector_url;
  std::string segmenter_url;
  std::optional<std::uint32_t> grid;
  double grid_opacity = 0.3;
  std::uint32_t grid_line_width = 1;
  bool grid_border = false;
  bool grid_to_segmenter = false;
  bool clamp = false;
  unsigned parallelism = 1;
  std::string prompt_template{kDefaultPromptTemplate};
  bool fail_on_error = false;
  std::string failure_policy = "score_zero";
  std::string method = "coordseg";
  long timeout_ms = 120000;
  unsigned retries = 1;
  unsigned max_connections = 4;
  std::string auth_token;
  long mock_delay_ms = 0;
};

int cmd_eval(const EvalOptions& o, const SharedOptions& shared, std::ostream& out,
             std::ostream& err) {
  // Configuration is checked before touching the dataset so that bad flags
  // exit 2 rather than 1.
  EvalConfig cfg;
  cfg.method = o.method;
  cfg.dataset_name = o.data.dataset;
  cfg.clamp_mode = o.clamp ? ClampMode::Clamp : ClampMode::Strict;
  cfg.prompt_template = o.prompt_template;
  cfg.parallelism = o.parallelism;
  cfg.seed = shared.seed;
  cfg.failure_policy = parse_failure_policy(o.failure_policy);
  cfg.grid_to_segmenter = o.grid_to_segmenter;
  if (o.grid) {
    GridConfig g;
    g.cells_per_axis = *o.grid;
    g.opacity = o.grid_opacity;
    g.line_width = o.grid_line_width;
    g.draw_border = o.grid_border;
    cfg.grid = g;
  }
  cfg.validate();

  std::optional<MockBehavior> mock;
  if (!o.mock.empty()) mock = parse_mock_behavior(o.mock);
  if (!mock && o.detector_url.empty()) {
    throw Error(ErrorCode::Config, "either --mock or --detector-url is required");
  }
  if (!mock && o.segmenter_url.empty()) {
    throw Error(ErrorCode::Config, "--segmenter-url is required with an HTTP detector");
  }
  auto backend = [&](const std::string& url) {
    BackendConfig b;
    b.endpoint = url;
    b.timeout = std::chrono::milliseconds(o.timeout_ms);
    b.retries = o.retries;
    b.max_connections = o.max_connections;
    if (!o.auth_token.empty()) b.auth_token = o.auth_token;
    b.validate();
    return b;
  };
  std::optional<BackendConfig> det_cfg;
  std::optional<BackendConfig> seg_cfg;
  if (!mock) det_cfg = backend(o.detector_url);
  if (!o.segmenter_url.empty()) seg_cfg = backend(o.segmenter_url);

  const DatasetSlice slice = load_dataset(o.data, shared.seed);
  if (slice.empty()) {
    err << "error: dataset produced no samples\n";
    return kRuntimeFailure;
  }

  std::unique_ptr<Detector> det =
      mock ? make_mock_detector(*mock, ground_truth_of(slice),
                                {shared.seed, std::chrono::milliseconds(o.mock_delay_ms)})
           : make_http_detector(*det_cfg);
  std::unique_ptr<Segmenter> seg =
      seg_cfg ? make_http_segmenter(*seg_cfg) : make_reference_segmenter();

  cfg.extra = {{"split", o.data.dataset == "voc" ? nlohmann::json(o.data.split) : nlohmann::json()},
               {"subset", o.data.subset ? nlohmann::json(*o.data.subset) : nlohmann::json()},
               {"warnings",
                {{"clipped", slice.warnings.clipped},
                 {"skipped_degenerate", slice.warnings.skipped_degenerate}}}};

  const fs::path dir = shared.output;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::ImageIo, fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  const fs::path results_path = dir / "results.jsonl";
  fs::remove(results_path, ec);
  cfg.results_path = results_path;

  const EvalReport report = run_eval(slice, *det, *seg, cfg);

  auto write_text = [](const fs::path& p, const std::string& text) {
    write_file(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  };
  const std::string table = emit_report(report, ReportFormat::Table);
  write_text(dir / "report.txt", table);
  write_text(dir / "report.json", emit_report(report, ReportFormat::Json));
  write_text(dir / "report.csv", emit_report(report, ReportFormat::Csv));
  out << table;
  out << fmt::format("results: {}\n", results_path.string());

  if (o.fail_on_error && report.n_failures > 0) {
    err << fmt::format("error: {} of {} samples failed\n", report.n_failures, report.n_samples);
    return kRuntimeFailure;
  }
  return kOk;
}

struct OverlayOptions {
  std::string input;
  std::string output;
  std::uint32_t cells = 9;
  double opacity = 0.3;
  std::uint32_t line_width = 1;
  bool border = false;
  std::string color = "0,0,0";
};

int cmd_overlay(const OverlayOptions& o, std::ostream& out) {
  GridConfig g;
  g.cells_per_axis = o.cells;
  g.opacity = o.opacity;
  g.line_width = o.line_width;
  g.draw_border = o.border;
  g.line_color = parse_color_flag(o.color);
  g.validate();
  const Image img = read_image(o.input);
  write_png(apply_grid_overlay(img, g), o.output);
  out << fmt::format("wrote {} ({}x{}, {} cells, opacity {})\n", o.output, img.width(),
                     img.height(), g.cells_per_axis, g.opacity);
  return kOk;
}

int cmd_metrics(const std::string& a, const std::string& b, std::ostream& out) {
  const PixelBox pa = parse_box_flag(a);
  const PixelBox pb = parse_box_flag(b);
  const MetricTriple m = metrics(pa, pb);
  out << fmt::format("iou={:.6f} giou={:.6f} ciou={:.6f}\n", m.iou, m.giou, m.ciou);
  return kOk;
}

int cmd_parse(const std::optional<std::string>& text, const std::string& dims, bool clamp,
              std::ostream& out) {
  std::optional<ImageDims> d;
  if (!dims.empty()) d = parse_dims_flag(dims);
  std::string input;
  if (text) {
    input = *text;
  } else {
    input.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  const auto outcome =
      parse_coordinate_text(input, d, clamp ? ClampMode::Clamp : ClampMode::Strict);
  const auto& b = outcome.box;
  out << fmt::format("{:.6f} {:.6f} {:.6f} {:.6f}\n", b.x1(), b.y1(), b.x2(), b.y2());
  return kOk;
}

int cmd_dataset_inspect(const DatasetOptions& o, const SharedOptions& shared, std::size_t show,
                        bool as_json, std::ostream& out) {
  const DatasetSlice slice = load_dataset(o, shared.seed);
  std::map<std::string, std::size_t> per_category;
  for (const auto& s : slice.samples) ++per_category[s.category];

  if (as_json) {
    nlohmann::json j = {{"source", to_string(slice.source)},
                        {"seed", slice.seed},
                        {"n_samples", slice.size()},
                        {"categories", per_category},
                        {"warnings",
                         {{"clipped", slice.warnings.clipped},
                          {"skipped_degenerate", slice.warnings.skipped_degenerate},
                          {"skipped_category", slice.warnings.skipped_category}}}};
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t i = 0; i < std::min(show, slice.size()); ++i) {
      const auto& s = slice.samples[i];
      samples.push_back({{"sample_id", s.sample_id},
                         {"image_path", s.image_path.string()},
                         {"dims", {s.dims.width, s.dims.height}},
                         {"category", s.category},
                         {"gt_box", s.gt_box.corners()},
                         {"difficult", s.difficult},
                         {"has_mask", s.gt_mask.has_value()}});
    }
    j["samples"] = samples;
    out << j.dump(2) << "\n";
    return kOk;
  }

  out << fmt::format("source: {}\nsamples: {}\nseed: {}\n", to_string(slice.source), slice.size(),
                     slice.seed);
  out << fmt::format("warnings: clipped={} skipped_degenerate={} skipped_category={}\n",
                     slice.warnings.clipped, slice.warnings.skipped_degenerate,
                     slice.warnings.skipped_category);
  out << "categories:\n";
  for (const auto& [name, count] : per_category) out << fmt::format("  {}: {}\n", name, count);
  for (std::size_t i = 0; i < std::min(show, slice.size()); ++i) {
    const auto& s = slice.samples[i];
    out << fmt::format("{} {} {}x{} [{},{},{},{}] {}\n", s.sample_id, s.category, s.dims.width,
                       s.dims.height, s.gt_box.x1(), s.gt_box.y1(), s.gt_box.x2(), s.gt_box.y2(),
                       s.image_path.string());
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coordinate-grounded segmentation: evaluation and utilities", "coordseg"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (TOML/INI key = value, one [section] per subcommand)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();

  SharedOptions shared;
  app.add_option("--seed", shared.seed, "Seed for subsets and jitter mocks")->capture_default_str();
  app.add_option("--output", shared.output, "Output directory")->capture_default_str();

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Run the detection + segmentation pipeline over a dataset");
  add_dataset_options(*eval, ev.data);
  eval->add_option("--mock", ev.mock, "Mock detector: perfect | jitter:SIGMA | refuse");
  eval->add_option("--detector-url", ev.detector_url, "Detector model server endpoint")
      ->envname("COORDSEG_DETECTOR_URL");
  eval->add_option("--segmenter-url", ev.segmenter_url, "Segmenter model server endpoint")
      ->envname("COORDSEG_SEGMENTER_URL");
  eval->add_option("--grid", ev.grid, "Overlay a grid with this many cells per axis on the detector input");
  eval->add_option("--grid-opacity", ev.grid_opacity, "Grid line opacity")->capture_default_str();
  eval->add_option("--grid-line-width", ev.grid_line_width, "Grid line width in pixels")
      ->capture_default_str();
  eval->add_flag("--grid-border", ev.grid_border, "Also draw the image border");
  eval->add_flag("--grid-to-segmenter", ev.grid_to_segmenter,
                 "Send the overlaid image to the segmenter as well");
  eval->add_flag("--clamp", ev.clamp, "Clamp predicted coordinates into [0,1] instead of rejecting");
  eval->add_option("--parallelism", ev.parallelism, "Concurrent pipelines")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval->add_option("--prompt-template", ev.prompt_template, "Prompt with a {label} placeholder")
      ->capture_default_str();
  eval->add_flag("--fail-on-error", ev.fail_on_error, "Exit 1 when any sample fails");
  eval->add_option("--failure-policy", ev.failure_policy, "score_zero | exclude")
      ->check(CLI::IsMember({"score_zero", "exclude"}))
      ->capture_default_str();
  eval->add_option("--method", ev.method, "Method name in the report")->capture_default_str();
  eval->add_option("--timeout-ms", ev.timeout_ms, "HTTP timeout per attempt")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval->add_option("--retries", ev.retries, "Extra attempts on transport failure")
      ->capture_default_str();
  eval->add_option("--max-connections", ev.max_connections, "Concurrent requests per backend")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval->add_option("--auth-token", ev.auth_token, "Bearer token for the model servers")
      ->envname("COORDSEG_AUTH_TOKEN");
  eval->add_option("--mock-delay-ms", ev.mock_delay_ms, "Artificial latency for the mock detector")
      ->check(CLI::NonNegativeNumber);

  OverlayOptions ov;
  auto* overlay = app.add_subcommand("overlay", "Alpha-blend a grid onto an image");
  overlay->add_option("input", ov.input, "Input PNG or JPEG")->required();
  overlay->add_option("output", ov.output, "Output PNG")->required();
  overlay->add_option("--cells", ov.cells, "Cells per axis")->capture_default_str();
  overlay->add_option("--opacity", ov.opacity, "Line opacity in [0,1]")->capture_default_str();
  overlay->add_option("--line-width", ov.line_width, "Line width in pixels")->capture_default_str();
  overlay->add_flag("--border", ov.border, "Also draw the image border");
  overlay->add_option("--color", ov.color, "Line color R,G,B")->capture_default_str();

  std::string box_a, box_b;
  auto* metrics_cmd = app.add_subcommand("metrics", "IoU, GIoU and CIoU of two boxes");
  metrics_cmd->add_option("--a", box_a, "First box x1,y1,x2,y2")->required();
  metrics_cmd->add_option("--b", box_b, "Second box x1,y1,x2,y2")->required();

  std::optional<std::string> parse_text;
  std::string parse_dims;
  bool parse_clamp = false;
  auto* parse = app.add_subcommand("parse", "Extract a normalized box from detector text");
  parse->add_option("--text", parse_text, "Detector output (default: read stdin)");
  parse->add_option("--dims", parse_dims, "Image size WIDTHxHEIGHT for pixel-valued output");
  parse->add_flag("--clamp", parse_clamp, "Clamp into [0,1] instead of rejecting");

  DatasetOptions insp;
  std::size_t show = 5;
  bool inspect_json = false;
  auto* inspect = app.add_subcommand("dataset-inspect", "Load a dataset and summarize it");
  add_dataset_options(*inspect, insp);
  inspect->add_option("--show", show, "Samples to list")->capture_default_str();
  inspect->add_flag("--json", inspect_json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*eval) return cmd_eval(ev, shared, out, err);
    if (*overlay) return cmd_overlay(ov, out);
    if (*metrics_cmd) return cmd_metrics(box_a, box_b, out);
    if (*parse) return cmd_parse(parse_text, parse_dims, parse_clamp, out);
    if (*inspect) return cmd_dataset_inspect(insp, shared, show, inspect_json, out);
  } catch (const Error& e) {
    err << fmt::format("error: {}: {}\n", to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kConfigError;
}

}  // namespace coordseg::cli
