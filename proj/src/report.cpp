#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "coordseg/evaluation.hpp"

namespace coordseg {

using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_table(const EvalReport& r) {
  const std::array<std::string, 5> header{"Method", "IoU", "GIoU", "CIoU", "AIT(s)"};
  const std::array<std::string, 5> row{
      r.method,
      fmt::format("{:.4f}", r.mean_iou),
      fmt::format("{:.4f}", r.mean_giou),
      fmt::format("{:.4f}", r.mean_ciou),
      fmt::format("{}", static_cast<long long>(std::round(r.ait_s))),
  };
  std::array<std::size_t, 5> width{};
  for (std::size_t i = 0; i < 5; ++i) width[i] = std::max(header[i].size(), row[i].size());

  auto line = [&](const std::array<std::string, 5>& cells) {
    std::string out;
    for (std::size_t i = 0; i < 5; ++i) {
      if (i) out += " | ";
      out += fmt::format("{:<{}}", cells[i], width[i]);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string rule;
  for (std::size_t i = 0; i < 5; ++i) {
    if (i) rule += "-|-";
    rule += std::string(width[i], '-');
  }
  return fmt::format("# dataset: {} (n={}, failures={})\n", r.dataset, r.n_samples, r.n_failures) +
         line(header) + rule + "\n" + line(row);
}

}  // namespace

ReportFormat parse_report_format(const std::string& s) {
  if (s == "table") return ReportFormat::Table;
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw Error(ErrorCode::Config, "report format must be table, json or csv, got '" + s + "'");
}

std::string emit_report(const EvalReport& r, ReportFormat format) {
  switch (format) {
    case ReportFormat::Table:
      return render_table(r);
    case ReportFormat::Json: {
      const json j = {
          {"method", r.method},
          {"dataset", r.dataset},
          {"n_samples", r.n_samples},
          {"n_failures", r.n_failures},
          {"mean_iou", r.mean_iou},
          {"mean_giou", r.mean_giou},
          {"mean_ciou", r.mean_ciou},
          {"ait_s", r.ait_s},
          {"failure_policy", r.failure_policy},
          {"config", r.config},
      };
      return j.dump(2) + "\n";
    }
    case ReportFormat::Csv:
      return fmt::format("{}\n{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", kCsvHeader,
                         csv_field(r.method), csv_field(r.dataset), r.n_samples, r.mean_iou,
                         r.mean_giou, r.mean_ciou, r.ait_s, r.n_failures);
  }
  return {};
}

EvalReport parse_report_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.n_failures = j.at("n_failures").get<std::size_t>();
    r.mean_iou = j.at("mean_iou").get<double>();
    r.mean_giou = j.at("mean_giou").get<double>();
    r.mean_ciou = j.at("mean_ciou").get<double>();
    r.ait_s = j.at("ait_s").get<double>();
    r.failure_policy = j.at("failure_policy").get<std::string>();
    r.config = j.at("config");
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Malformed, fmt::format("bad report JSON: {}", e.what()));
  }
}

}  // namespace coordseg
