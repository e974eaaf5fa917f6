#include "coordseg/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace coordseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Error missing_path(const fs::path& p, std::string_view what) {
  return Error(ErrorCode::MissingPath, fmt::format("{} not found: '{}'", what, p.string()));
}

bool accepted(const CategoryFilter& filter, const std::string& name) {
  return !filter || filter->contains(name);
}

void require_unique_ids(const std::vector<AnnotatedSample>& samples) {
  std::unordered_set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.sample_id).second) {
      throw Error(ErrorCode::Malformed, fmt::format("duplicate sample id '{}'", s.sample_id));
    }
  }
}

template <typename T>
T json_field(const json& j, const char* key, std::string_view where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw Error(ErrorCode::Malformed, fmt::format("{} is missing '{}'", where, key));
  }
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Malformed, fmt::format("{} field '{}': {}", where, key, e.what()));
  }
}

}  // namespace

std::string to_string(DatasetSource s) { return s == DatasetSource::Coco ? "coco" : "voc"; }

DatasetSource parse_dataset_source(const std::string& s) {
  if (s == "coco") return DatasetSource::Coco;
  if (s == "voc") return DatasetSource::Voc;
  throw Error(ErrorCode::Config, "dataset must be 'coco' or 'voc', got '" + s + "'");
}

std::optional<PixelBox> clip_annotation(double x1, double y1, double x2, double y2,
                                        const ImageDims& dims, LoadWarnings& warnings) {
  if (!(x2 > x1) || !(y2 > y1)) {
    ++warnings.skipped_degenerate;
    return std::nullopt;
  }
  const double w = dims.width;
  const double h = dims.height;
  const double cx1 = std::clamp(x1, 0.0, w);
  const double cy1 = std::clamp(y1, 0.0, h);
  const double cx2 = std::clamp(x2, 0.0, w);
  const double cy2 = std::clamp(y2, 0.0, h);
  if (!(cx2 > cx1) || !(cy2 > cy1)) {
    ++warnings.skipped_degenerate;
    return std::nullopt;
  }
  if (cx1 != x1 || cy1 != y1 || cx2 != x2 || cy2 != y2) ++warnings.clipped;
  return PixelBox{cx1, cy1, cx2, cy2};
}

DatasetSlice load_coco(const fs::path& annotation_file, const fs::path& image_root,
                       const CategoryFilter& categories) {
  std::ifstream in(annotation_file);
  if (!in) throw missing_path(annotation_file, "COCO annotation file");

  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Malformed,
                fmt::format("{}: malformed JSON: {}", annotation_file.string(), e.what()));
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::Malformed, annotation_file.string() + ": top level is not an object");
  }
  for (const char* key : {"images", "annotations", "categories"}) {
    if (!doc.contains(key) || !doc[key].is_array()) {
      throw Error(ErrorCode::Malformed,
                  fmt::format("{}: '{}' array missing", annotation_file.string(), key));
    }
  }

  struct ImageInfo {
    std::string file_name;
    ImageDims dims;
  };
  std::unordered_map<std::int64_t, ImageInfo> images;
  for (const auto& img : doc["images"]) {
    const auto id = json_field<std::int64_t>(img, "id", "image");
    const auto w = json_field<std::int64_t>(img, "width", "image");
    const auto h = json_field<std::int64_t>(img, "height", "image");
    if (w <= 0 || h <= 0) {
      throw Error(ErrorCode::Malformed, fmt::format("image {} has non-positive size {}x{}", id, w, h));
    }
    images[id] = {json_field<std::string>(img, "file_name", "image"),
                  ImageDims{static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h)}};
  }
  std::unordered_map<std::int64_t, std::string> category_names;
  for (const auto& cat : doc["categories"]) {
    category_names[json_field<std::int64_t>(cat, "id", "category")] =
        json_field<std::string>(cat, "name", "category");
  }

  DatasetSlice slice;
  slice.source = DatasetSource::Coco;
  std::size_t index = 0;
  for (const auto& ann : doc["annotations"]) {
    const std::size_t position = index++;
    const auto image_id = json_field<std::int64_t>(ann, "image_id", "annotation");
    const auto category_id = json_field<std::int64_t>(ann, "category_id", "annotation");
    const auto bbox = json_field<std::vector<double>>(ann, "bbox", "annotation");
    if (bbox.size() != 4) {
      throw Error(ErrorCode::Malformed,
                  fmt::format("annotation {} bbox has {} values, expected 4", position, bbox.size()));
    }
    auto img = images.find(image_id);
    if (img == images.end()) {
      throw Error(ErrorCode::MissingReference,
                  fmt::format("annotation {} references unknown image id {}", position, image_id));
    }
    auto cat = category_names.find(category_id);
    if (cat == category_names.end()) {
      throw Error(ErrorCode::MissingReference,
                  fmt::format("annotation {} references unknown category id {}", position, category_id));
    }
    if (!accepted(categories, cat->second)) {
      ++slice.warnings.skipped_category;
      continue;
    }
    const auto [x, y, w, h] = std::array{bbox[0], bbox[1], bbox[2], bbox[3]};
    auto box = clip_annotation(x, y, x + w, y + h, img->second.dims, slice.warnings);
    if (!box) continue;

    const std::string ann_id = ann.contains("id") ? ann["id"].dump() : fmt::format("#{}", position);
    slice.samples.push_back(AnnotatedSample{
        .sample_id = fmt::format("{}:{}", image_id, ann_id),
        .image_path = image_root / img->second.file_name,
        .dims = img->second.dims,
        .category = cat->second,
        .gt_box = *box,
        .gt_mask = std::nullopt,
    });
  }
  require_unique_ids(slice.samples);
  return slice;
}

DatasetSlice load_voc(const fs::path& voc_root, const std::string& split,
                      const CategoryFilter& categories) {
  namespace pt = boost::property_tree;

  const fs::path annotations = voc_root / "Annotations";
  if (!fs::is_directory(annotations)) throw missing_path(annotations, "VOC Annotations directory");
  const fs::path split_file = voc_root / "ImageSets" / "Main" / (split + ".txt");
  std::ifstream split_in(split_file);
  if (!split_in) throw missing_path(split_file, "VOC split list");

  DatasetSlice slice;
  slice.source = DatasetSource::Voc;

  std::string line;
  while (std::getline(split_in, line)) {
    std::istringstream fields(line);
    std::string id;
    if (!(fields >> id)) continue;

    const fs::path xml_path = annotations / (id + ".xml");
    pt::ptree tree;
    try {
      pt::read_xml(xml_path.string(), tree);
    } catch (const pt::xml_parser_error& e) {
      if (!fs::exists(xml_path)) throw missing_path(xml_path, "VOC annotation");
      throw Error(ErrorCode::Malformed, fmt::format("malformed XML: {}", e.what()));
    }

    ImageDims dims;
    std::string filename;
    try {
      const auto& root = tree.get_child("annotation");
      dims = ImageDims{root.get<std::uint32_t>("size.width"), root.get<std::uint32_t>("size.height")};
      filename = root.get<std::string>("filename", id + ".jpg");
    } catch (const pt::ptree_error& e) {
      throw Error(ErrorCode::Malformed, fmt::format("{}: {}", xml_path.string(), e.what()));
    } catch (const Error& e) {
      throw Error(ErrorCode::Malformed, fmt::format("{}: {}", xml_path.string(), e.what()));
    }

    std::optional<std::vector<std::uint8_t>> instances;
    const fs::path seg_path = voc_root / "SegmentationObject" / (id + ".png");
    if (fs::exists(seg_path)) {
      ImageDims seg_dims;
      instances = read_png_indices(seg_path, seg_dims);
      if (seg_dims != dims) {
        throw Error(ErrorCode::Malformed,
                    fmt::format("{}: mask is {}x{}, annotation says {}x{}", seg_path.string(),
                                seg_dims.width, seg_dims.height, dims.width, dims.height));
      }
    }

    std::size_t object_index = 0;
    for (const auto& [tag, obj] : tree.get_child("annotation")) {
      if (tag != "object") continue;
      const std::size_t k = object_index++;
      std::string name;
      double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
      bool difficult = false;
      try {
        name = obj.get<std::string>("name");
        xmin = obj.get<double>("bndbox.xmin");
        ymin = obj.get<double>("bndbox.ymin");
        xmax = obj.get<double>("bndbox.xmax");
        ymax = obj.get<double>("bndbox.ymax");
        difficult = obj.get<int>("difficult", 0) != 0;
      } catch (const pt::ptree_error& e) {
        throw Error(ErrorCode::Malformed,
                    fmt::format("{} object {}: {}", xml_path.string(), k, e.what()));
      }
      if (name.empty()) {
        throw Error(ErrorCode::Malformed, fmt::format("{} object {}: empty name", xml_path.string(), k));
      }
      if (!accepted(categories, name)) {
        ++slice.warnings.skipped_category;
        continue;
      }
      auto box = clip_annotation(xmin, ymin, xmax, ymax, dims, slice.warnings);
      if (!box) continue;

      std::optional<BinaryMask> mask;
      if (instances) {
        BinaryMask m(dims);
        const auto label = static_cast<std::uint8_t>(k + 1);
        for (std::size_t i = 0; i < instances->size(); ++i) m.set(i, (*instances)[i] == label);
        mask = std::move(m);
      }
      slice.samples.push_back(AnnotatedSample{
          .sample_id = fmt::format("{}:{}", id, k),
          .image_path = voc_root / "JPEGImages" / filename,
          .dims = dims,
          .category = name,
          .gt_box = *box,
          .gt_mask = std::move(mask),
          .difficult = difficult,
      });
    }
  }
  require_unique_ids(slice.samples);
  return slice;
}

DatasetSlice sample_subset(const DatasetSlice& s, std::size_t n, std::uint64_t seed) {
  if (n > s.size()) {
    throw Error(ErrorCode::SubsetTooLarge,
                fmt::format("subset of {} requested from a slice of {}", n, s.size()));
  }
  std::vector<std::size_t> order(s.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSlice out;
  out.source = s.source;
  out.seed = seed;
  out.warnings = s.warnings;
  out.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.samples.push_back(s.samples[order[i]]);
  return out;
}

std::string prompt_from_category(const std::string& label, std::string_view templ) {
  constexpr std::string_view kPlaceholder = "{label}";
  const auto at = templ.find(kPlaceholder);
  if (at == std::string_view::npos) {
    throw Error(ErrorCode::Config,
                fmt::format("prompt template has no {{label}} placeholder: '{}'", templ));
  }
  std::string out(templ.substr(0, at));
  out += label;
  out += templ.substr(at + kPlaceholder.size());
  return out;
}

}  // namespace coordseg
