#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "coordseg/geometry.hpp"
#include "coordseg/imaging.hpp"

namespace coordseg {

/// One (image, object instance) pair.
struct AnnotatedSample {
  std::string sample_id;
  std::filesystem::path image_path;
  ImageDims dims;
  std::string category;
  PixelBox gt_box;
  std::optional<BinaryMask> gt_mask;
  bool difficult = false;
};

enum class DatasetSource { Coco, Voc };

std::string to_string(DatasetSource s);
DatasetSource parse_dataset_source(const std::string& s);

/// Counters for annotations that were repaired or dropped while loading.
struct LoadWarnings {
  std::size_t clipped = 0;             ///< box extended past the image and was clipped
  std::size_t skipped_degenerate = 0;  ///< non-positive extent, before or after clipping
  std::size_t skipped_category = 0;    ///< filtered out by the category filter

  std::size_t total() const noexcept { return clipped + skipped_degenerate; }
};

struct DatasetSlice {
  std::vector<AnnotatedSample> samples;
  DatasetSource source = DatasetSource::Coco;
  std::uint64_t seed = 0;
  LoadWarnings warnings;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
};

using CategoryFilter = std::optional<std::set<std::string>>;

/// COCO instances JSON. Each annotation's [x, y, w, h] becomes the corner
/// box [x, y, x+w, y+h]. Throws Malformed on bad JSON or schema and
/// MissingReference for annotations pointing at unknown image or category ids.
DatasetSlice load_coco(const std::filesystem::path& annotation_file,
                       const std::filesystem::path& image_root,
                       const CategoryFilter& categories = std::nullopt);

/// Pascal VOC layout: Annotations/<id>.xml, ImageSets/Main/<split>.txt,
/// JPEGImages/<filename>. Instance masks are attached when
/// SegmentationObject/<id>.png exists.
DatasetSlice load_voc(const std::filesystem::path& voc_root, const std::string& split,
                      const CategoryFilter& categories = std::nullopt);

/// Seeded shuffle, then the first n. Throws SubsetTooLarge when n > size.
DatasetSlice sample_subset(const DatasetSlice& s, std::size_t n, std::uint64_t seed);

inline constexpr std::string_view kDefaultPromptTemplate =
    "Provide the bounding box of the {label} as [x1,y1,x2,y2] normalized coordinates.";

/// Replaces the first "{label}". Throws Config when the placeholder is missing.
std::string prompt_from_category(const std::string& label,
                                 std::string_view templ = kDefaultPromptTemplate);

/// Clips a raw annotation box to the image. Returns nullopt when the clipped
/// box has no area; bumps the matching warning counter.
std::optional<PixelBox> clip_annotation(double x1, double y1, double x2, double y2,
                                        const ImageDims& dims, LoadWarnings& warnings);

}  // namespace coordseg
