#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fmt/format.h>

#include "coordseg/backends.hpp"
#include "coordseg/datasets.hpp"
#include "coordseg/evaluation.hpp"
#include "coordseg/extraction.hpp"
#include "coordseg/geometry.hpp"
#include "coordseg/imaging.hpp"

namespace py = pybind11;
using namespace coordseg;

namespace {

using RgbArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image image_from_array(const RgbArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) {
    throw py::value_error("expected a uint8 array of shape (height, width, 3)");
  }
  const ImageDims d{static_cast<std::uint32_t>(a.shape(1)), static_cast<std::uint32_t>(a.shape(0))};
  return Image(d, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

RgbArray array_from_image(const Image& img) {
  RgbArray out({py::ssize_t(img.height()), py::ssize_t(img.width()), py::ssize_t(3)});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

BinaryMask mask_from_array(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D boolean array");
  BinaryMask m(ImageDims{static_cast<std::uint32_t>(a.shape(1)), static_cast<std::uint32_t>(a.shape(0))});
  for (py::ssize_t i = 0; i < a.size(); ++i) m.set(static_cast<std::size_t>(i), a.data()[i]);
  return m;
}

py::array_t<bool> array_from_mask(const BinaryMask& m) {
  py::array_t<bool> out({py::ssize_t(m.dims().height), py::ssize_t(m.dims().width)});
  for (std::size_t i = 0; i < m.size(); ++i) out.mutable_data()[i] = m.get(i);
  return out;
}

py::bytes to_py_bytes(const Bytes& b) {
  return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

Bytes from_py_bytes(const py::bytes& b) {
  const std::string_view s = b;
  return Bytes(s.begin(), s.end());
}

std::string repr4(const char* name, const std::array<double, 4>& c) {
  return fmt::format("{}({}, {}, {}, {})", name, c[0], c[1], c[2], c[3]);
}

template <class Box>
void bind_metrics(py::module_& m) {
  m.def("iou", [](const Box& a, const Box& b) { return iou(a, b); }, py::arg("a"), py::arg("b"));
  m.def("giou", [](const Box& a, const Box& b) { return giou(a, b); }, py::arg("a"), py::arg("b"));
  m.def("ciou", [](const Box& pred, const Box& truth) { return ciou(pred, truth); }, py::arg("pred"),
        py::arg("truth"));
  m.def("metrics", [](const Box& pred, const Box& truth) { return metrics(pred, truth); }, py::arg("pred"),
        py::arg("truth"));
}

}  // namespace

PYBIND11_MODULE(_coordseg, m) {
  m.doc() = "Coordinate-grounded segmentation core";

  static PyObject* error_type =
      PyErr_NewException("coordseg._coordseg.CoordsegError", PyExc_ValueError, nullptr);
  m.attr("CoordsegError") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::handle(error_type)(e.what());
      inst.attr("code") = to_string(e.code());
      inst.attr("offset") = e.offset ? py::cast(*e.offset) : py::none();
      inst.attr("span") = e.span ? py::cast(std::make_pair(e.span->begin, e.span->end)) : py::none();
      inst.attr("status") = e.status ? py::cast(*e.status) : py::none();
      PyErr_SetObject(error_type, inst.ptr());
    }
  });

  // -- geometry --------------------------------------------------------------

  py::class_<ImageDims>(m, "ImageDims")
      .def(py::init<std::uint32_t, std::uint32_t>(), py::arg("width"), py::arg("height"))
      .def_readonly("width", &ImageDims::width)
      .def_readonly("height", &ImageDims::height)
      .def(py::self == py::self)
      .def("__repr__", [](const ImageDims& d) { return fmt::format("ImageDims({}, {})", d.width, d.height); });

  py::class_<NormBox>(m, "NormBox")
      .def(py::init<double, double, double, double>(), py::arg("x1"), py::arg("y1"), py::arg("x2"), py::arg("y2"))
      .def_property_readonly("x1", &NormBox::x1)
      .def_property_readonly("y1", &NormBox::y1)
      .def_property_readonly("x2", &NormBox::x2)
      .def_property_readonly("y2", &NormBox::y2)
      .def("corners", &NormBox::corners)
      .def(py::self == py::self)
      .def("__repr__", [](const NormBox& b) { return repr4("NormBox", b.corners()); });

  py::class_<PixelBox>(m, "PixelBox")
      .def(py::init<double, double, double, double>(), py::arg("x1"), py::arg("y1"), py::arg("x2"), py::arg("y2"))
      .def_property_readonly("x1", &PixelBox::x1)
      .def_property_readonly("y1", &PixelBox::y1)
      .def_property_readonly("x2", &PixelBox::x2)
      .def_property_readonly("y2", &PixelBox::y2)
      .def_property_readonly("width", &PixelBox::width)
      .def_property_readonly("height", &PixelBox::height)
      .def("corners", &PixelBox::corners)
      .def("within", &PixelBox::within)
      .def(py::self == py::self)
      .def("__repr__", [](const PixelBox& b) { return repr4("PixelBox", b.corners()); });

  py::class_<MetricTriple>(m, "MetricTriple")
      .def_readonly("iou", &MetricTriple::iou)
      .def_readonly("giou", &MetricTriple::giou)
      .def_readonly("ciou", &MetricTriple::ciou)
      .def("__repr__", [](const MetricTriple& t) {
        return fmt::format("MetricTriple(iou={}, giou={}, ciou={})", t.iou, t.giou, t.ciou);
      });

  m.def("normalize_box", &normalize_box, py::arg("box"), py::arg("dims"));
  m.def("denormalize_box", &denormalize_box, py::arg("box"), py::arg("dims"));
  m.def("to_raster", &to_raster, py::arg("box"), py::arg("dims"));
  m.def(
      "validate_coordinates",
      [](std::array<double, 4> v, const std::string& mode) { return validate_coordinates(v, parse_clamp_mode(mode)); },
      py::arg("values"), py::arg("mode") = "strict");

  // Separate overloads per box type: mixing NormBox and PixelBox raises TypeError.
  bind_metrics<NormBox>(m);
  bind_metrics<PixelBox>(m);

  // -- extraction ------------------------------------------------------------

  m.def(
      "parse_coordinate_text",
      [](const std::string& text, std::optional<ImageDims> dims, const std::string& mode) {
        const auto r = parse_coordinate_text(text, dims, parse_clamp_mode(mode));
        return py::make_tuple(r.box, py::make_tuple(r.source_span.begin, r.source_span.end));
      },
      py::arg("text"), py::arg("dims") = py::none(), py::arg("mode") = "strict",
      "Returns (NormBox, (begin, end)) for the leftmost coordinate quadruple.");
  m.def("format_norm_box", &format_norm_box, py::arg("box"), py::arg("decimals") = 6);

  // -- imaging ---------------------------------------------------------------

  py::class_<GridConfig>(m, "GridConfig")
      .def(py::init([](std::uint32_t cells, double opacity, std::uint32_t line_width,
                       std::array<std::uint8_t, 3> color, bool border) {
             GridConfig g;
             g.cells_per_axis = cells;
             g.opacity = opacity;
             g.line_width = line_width;
             g.line_color = color;
             g.draw_border = border;
             g.validate();
             return g;
           }),
           py::arg("cells") = 9, py::arg("opacity") = 0.3, py::arg("line_width") = 1,
           py::arg("line_color") = std::array<std::uint8_t, 3>{0, 0, 0}, py::arg("draw_border") = false)
      .def_readonly("cells", &GridConfig::cells_per_axis)
      .def_readonly("opacity", &GridConfig::opacity)
      .def_readonly("line_width", &GridConfig::line_width)
      .def_readonly("line_color", &GridConfig::line_color)
      .def_readonly("draw_border", &GridConfig::draw_border);

  m.def("grid_line_anchors", &grid_line_anchors, py::arg("extent"), py::arg("config"));
  m.def(
      "apply_grid_overlay",
      [](const RgbArray& img, const GridConfig& cfg) { return array_from_image(apply_grid_overlay(image_from_array(img), cfg)); },
      py::arg("image"), py::arg("config") = GridConfig{},
      "Alpha-blends grid lines onto an (H, W, 3) uint8 array; returns a new array.");
  m.def(
      "box_to_mask", [](const PixelBox& b, const ImageDims& d) { return array_from_mask(box_to_mask(b, d)); },
      py::arg("box"), py::arg("dims"));
  m.def(
      "mask_iou",
      [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<bool, py::array::c_style | py::array::forcecast>& b) {
        return mask_iou(mask_from_array(a), mask_from_array(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "encode_mask",
      [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& a, const std::string& format) {
        return to_py_bytes(encode_mask(mask_from_array(a), parse_mask_format(format)));
      },
      py::arg("mask"), py::arg("format") = "rle");
  m.def(
      "decode_mask",
      [](const py::bytes& b, const std::string& format) {
        return array_from_mask(decode_mask(from_py_bytes(b), parse_mask_format(format)));
      },
      py::arg("data"), py::arg("format") = "rle");
  m.def(
      "read_image", [](const std::filesystem::path& p) { return array_from_image(read_image(p)); },
      py::arg("path"));
  m.def(
      "write_png", [](const RgbArray& img, const std::filesystem::path& p) { write_png(image_from_array(img), p); },
      py::arg("image"), py::arg("path"));
  m.def(
      "encode_png", [](const RgbArray& img) { return to_py_bytes(encode_png(image_from_array(img))); },
      py::arg("image"));

  // -- datasets --------------------------------------------------------------

  py::class_<AnnotatedSample>(m, "AnnotatedSample")
      .def_readonly("sample_id", &AnnotatedSample::sample_id)
      .def_readonly("image_path", &AnnotatedSample::image_path)
      .def_readonly("dims", &AnnotatedSample::dims)
      .def_readonly("category", &AnnotatedSample::category)
      .def_readonly("gt_box", &AnnotatedSample::gt_box)
      .def_readonly("difficult", &AnnotatedSample::difficult)
      .def_property_readonly("gt_mask", [](const AnnotatedSample& s) -> py::object {
        return s.gt_mask ? py::object(array_from_mask(*s.gt_mask)) : py::none();
      })
      .def("__repr__", [](const AnnotatedSample& s) {
        return fmt::format("AnnotatedSample('{}', '{}')", s.sample_id, s.category);
      });

  py::class_<LoadWarnings>(m, "LoadWarnings")
      .def_readonly("clipped", &LoadWarnings::clipped)
      .def_readonly("skipped_degenerate", &LoadWarnings::skipped_degenerate)
      .def_readonly("skipped_category", &LoadWarnings::skipped_category);

  py::class_<DatasetSlice>(m, "DatasetSlice")
      .def_readonly("samples", &DatasetSlice::samples)
      .def_readonly("seed", &DatasetSlice::seed)
      .def_readonly("warnings", &DatasetSlice::warnings)
      .def_property_readonly("source", [](const DatasetSlice& s) { return to_string(s.source); })
      .def("__len__", &DatasetSlice::size)
      .def("__getitem__", [](const DatasetSlice& s, std::size_t i) {
        if (i >= s.size()) throw py::index_error();
        return s.samples[i];
      });

  m.def("load_coco", &load_coco, py::arg("annotation_file"), py::arg("image_root"),
        py::arg("categories") = py::none());
  m.def("load_voc", &load_voc, py::arg("voc_root"), py::arg("split") = "val", py::arg("categories") = py::none());
  m.def("sample_subset", &sample_subset, py::arg("slice"), py::arg("n"), py::arg("seed"));
  m.def(
      "prompt_from_category",
      [](const std::string& label, const std::string& templ) { return prompt_from_category(label, templ); },
      py::arg("label"), py::arg("template") = std::string(kDefaultPromptTemplate));

  // -- evaluation ------------------------------------------------------------

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("method", &EvalReport::method)
      .def_readonly("dataset", &EvalReport::dataset)
      .def_readonly("n_samples", &EvalReport::n_samples)
      .def_readonly("n_failures", &EvalReport::n_failures)
      .def_readonly("mean_iou", &EvalReport::mean_iou)
      .def_readonly("mean_giou", &EvalReport::mean_giou)
      .def_readonly("mean_ciou", &EvalReport::mean_ciou)
      .def_readonly("ait_s", &EvalReport::ait_s)
      .def_readonly("failure_policy", &EvalReport::failure_policy)
      .def("emit", [](const EvalReport& r, const std::string& f) { return emit_report(r, parse_report_format(f)); },
           py::arg("format") = "table")
      .def_static("from_json", [](const std::string& s) { return parse_report_json(s); }, py::arg("text"))
      .def(py::self == py::self);

  m.def(
      "run_mock_eval",
      [](const DatasetSlice& slice, const std::string& mock, std::optional<std::map<std::string, NormBox>> ground_truth,
         std::uint64_t seed, double delay_ms, std::optional<GridConfig> grid, unsigned parallelism,
         const std::string& failure_policy, const std::string& clamp_mode, const std::string& method) {
        EvalConfig cfg;
        cfg.method = method;
        cfg.dataset_name = to_string(slice.source);
        cfg.grid = grid;
        cfg.parallelism = parallelism;
        cfg.seed = seed;
        cfg.failure_policy = parse_failure_policy(failure_policy);
        cfg.clamp_mode = parse_clamp_mode(clamp_mode);
        const auto delay = std::chrono::milliseconds(static_cast<long>(delay_ms));
        const auto det = make_mock_detector(parse_mock_behavior(mock),
                                            ground_truth ? *ground_truth : ground_truth_of(slice), {seed, delay});
        const auto seg = make_reference_segmenter();
        py::gil_scoped_release release;
        return run_eval(slice, *det, *seg, cfg);
      },
      py::arg("slice"), py::arg("mock") = "perfect", py::arg("ground_truth") = py::none(), py::arg("seed") = 0,
      py::arg("delay_ms") = 0.0, py::arg("grid") = py::none(), py::arg("parallelism") = 1,
      py::arg("failure_policy") = "score_zero", py::arg("clamp_mode") = "strict", py::arg("method") = "coordseg",
      "Runs the pipeline with a mock detector and the reference segmenter.\n"
      "ground_truth defaults to the slice's own boxes; ids missing from it are refused.");
  m.def("ground_truth_of", &ground_truth_of, py::arg("slice"));
}
