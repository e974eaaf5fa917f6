#include <doctest.h>

#include <cmath>
#include <random>

#include "coordseg/geometry.hpp"
#include "oracles.hpp"
#include "random_boxes.hpp"

using namespace coordseg;

namespace {

PixelBox px(const oracle::IntBox& b) { return PixelBox{double(b.x1), double(b.y1), double(b.x2), double(b.y2)}; }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected coordseg::Error");
  return ErrorCode::Internal;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("normalize_box examples") {
  const NormBox a = normalize_box(PixelBox{30, 60, 90, 100}, ImageDims{300, 200});
  CHECK(a.x1() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(a.y1() == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(a.x2() == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(a.y2() == doctest::Approx(0.5).epsilon(1e-12));

  const NormBox full = normalize_box(PixelBox{0, 0, 640, 480}, ImageDims{640, 480});
  CHECK(full == NormBox{0, 0, 1, 1});

  // 15/150, 40/200, 45/150, 100/200
  const NormBox b = normalize_box(PixelBox{15, 40, 45, 100}, ImageDims{150, 200});
  CHECK(b.x1() == doctest::Approx(0.1));
  CHECK(b.y1() == doctest::Approx(0.2));
  CHECK(b.x2() == doctest::Approx(0.3));
  CHECK(b.y2() == doctest::Approx(0.5));
  const PixelBox back = denormalize_box(b, ImageDims{150, 200});
  CHECK(back.x1() == doctest::Approx(15));
  CHECK(back.y2() == doctest::Approx(100));
}

TEST_CASE("normalize_box rejects out-of-bounds boxes and names the field") {
  try {
    normalize_box(PixelBox{10, 10, 310, 100}, ImageDims{300, 200});
    FAIL("expected OutOfBounds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfBounds);
    CHECK(std::string(e.what()).find("x2") != std::string::npos);
  }
  CHECK(code_of([] { normalize_box(PixelBox{-1, 0, 10, 10}, ImageDims{300, 200}); }) ==
        ErrorCode::OutOfBounds);
  CHECK(code_of([] { PixelBox{5, 0, 5, 10}; }) == ErrorCode::Degenerate);
  CHECK(code_of([] { ImageDims{0, 10}; }) == ErrorCode::InvalidDims);
}

TEST_CASE("denormalize_box examples") {
  const PixelBox a = denormalize_box(NormBox{0.1, 0.3, 0.3, 0.5}, ImageDims{300, 200});
  CHECK(a.x1() == doctest::Approx(30));
  CHECK(a.y1() == doctest::Approx(60));
  CHECK(a.x2() == doctest::Approx(90));
  CHECK(a.y2() == doctest::Approx(100));

  CHECK(denormalize_box(NormBox{0, 0, 1, 1}, ImageDims{640, 480}) == PixelBox{0, 0, 640, 480});

  const PixelBox q = denormalize_box(NormBox{0.334, 0.120, 0.550, 0.988}, ImageDims{1000, 1000});
  CHECK(q.x1() == doctest::Approx(334));
  CHECK(q.y1() == doctest::Approx(120));
  CHECK(q.x2() == doctest::Approx(550));
  CHECK(q.y2() == doctest::Approx(988));
}

TEST_CASE("round trip normalize/denormalize within 1e-9") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint32_t> side(1, 4000);
  for (int i = 0; i < 500; ++i) {
    const ImageDims d{side(rng), side(rng)};
    std::uniform_real_distribution<double> xs(0.0, d.width), ys(0.0, d.height);
    double x1 = xs(rng), x2 = xs(rng), y1 = ys(rng), y2 = ys(rng);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    if (x1 == x2 || y1 == y2) continue;
    const PixelBox b{x1, y1, x2, y2};
    const PixelBox r = denormalize_box(normalize_box(b, d), d);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(r.corners()[k] - b.corners()[k]) <= 1e-9);
  }
}

TEST_CASE("to_raster rounds half away from zero and clamps") {
  const ImageDims d{100, 50};
  CHECK(to_raster(PixelBox{10.5, 2.4, 20.5, 9.6}, d) == PixelBox{11, 2, 21, 10});
  CHECK(to_raster(PixelBox{0, 0, 100, 50}, d) == PixelBox{0, 0, 100, 50});
  // Collapsed by rounding: widened to one pixel.
  CHECK(to_raster(PixelBox{10.1, 5.1, 10.2, 5.2}, d) == PixelBox{10, 5, 11, 6});
  // Collapsed at the far edge: stays inside.
  CHECK(to_raster(PixelBox{99.8, 49.8, 99.9, 49.9}, d) == PixelBox{99, 49, 100, 50});
}

TEST_CASE("validate_coordinates") {
  const NormBox q = validate_coordinates({0.334, 0.120, 0.550, 0.988});
  CHECK(q == NormBox{0.334, 0.120, 0.550, 0.988});

  CHECK(validate_coordinates({-0.01, 0.2, 0.5, 0.8}, ClampMode::Clamp) == NormBox{0, 0.2, 0.5, 0.8});
  CHECK(code_of([] { validate_coordinates({-0.01, 0.2, 0.5, 0.8}); }) == ErrorCode::OutOfRange);
  CHECK(code_of([] { validate_coordinates({0.5, 0.2, 0.5, 0.8}); }) == ErrorCode::Degenerate);
  CHECK(code_of([] { validate_coordinates({NAN, 0.2, 0.5, 0.8}, ClampMode::Clamp); }) ==
        ErrorCode::NonFinite);
  CHECK(code_of([] { validate_coordinates({0.1, 0.2, INFINITY, 0.8}); }) == ErrorCode::NonFinite);
  // Clamping can collapse a box.
  CHECK(code_of([] { validate_coordinates({1.2, 0.2, 1.5, 0.8}, ClampMode::Clamp); }) ==
        ErrorCode::Degenerate);
}

TEST_CASE("strict accepts exactly when clamp is the identity") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> v(-0.3, 1.3);
  for (int i = 0; i < 2000; ++i) {
    std::array<double, 4> raw{v(rng), v(rng), v(rng), v(rng)};
    bool clamp_identity = true;
    std::optional<NormBox> clamped;
    try {
      clamped = validate_coordinates(raw, ClampMode::Clamp);
      clamp_identity = clamped->corners() == raw;
    } catch (const Error&) {
      clamp_identity = false;
    }
    bool strict_ok = true;
    try {
      validate_coordinates(raw, ClampMode::Strict);
    } catch (const Error&) {
      strict_ok = false;
    }
    CHECK(strict_ok == clamp_identity);
  }
}

TEST_CASE("iou examples") {
  CHECK(iou(PixelBox{0, 0, 2, 2}, PixelBox{0, 0, 2, 2}) == 1.0);
  CHECK(iou(PixelBox{0, 0, 1, 1}, PixelBox{2, 2, 3, 3}) == 0.0);
  CHECK(iou(PixelBox{0, 0, 2, 2}, PixelBox{1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  CHECK(oracle::raster_iou({0, 0, 2, 2}, {1, 1, 3, 3}, 4) == iou(PixelBox{0, 0, 2, 2}, PixelBox{1, 1, 3, 3}));
  // Touching edges: zero-area intersection.
  CHECK(iou(PixelBox{0, 0, 2, 2}, PixelBox{2, 0, 3, 2}) == 0.0);
  CHECK(iou(NormBox{0.1, 0.1, 0.5, 0.5}, NormBox{0.1, 0.1, 0.5, 0.5}) == 1.0);
}

TEST_CASE("giou examples") {
  CHECK(giou(PixelBox{0, 0, 2, 2}, PixelBox{0, 0, 2, 2}) == 1.0);
  CHECK(giou(PixelBox{0, 0, 2, 2}, PixelBox{1, 1, 3, 3}) == doctest::Approx(-5.0 / 63.0).epsilon(1e-12));
  CHECK(giou(PixelBox{0, 0, 1, 1}, PixelBox{9, 9, 10, 10}) == doctest::Approx(-0.98).epsilon(1e-12));
}

TEST_CASE("ciou examples") {
  CHECK(ciou(PixelBox{0, 0, 2, 2}, PixelBox{0, 0, 2, 2}) == 1.0);
  CHECK(ciou(PixelBox{0, 0, 2, 2}, PixelBox{1, 1, 3, 3}) == doctest::Approx(2.0 / 63.0).epsilon(1e-12));
  CHECK(ciou(PixelBox{0, 0, 4, 4}, PixelBox{1, 1, 3, 3}) == doctest::Approx(0.25).epsilon(1e-12));
  // Different aspect ratios engage the alpha*v term.
  const std::array<double, 4> p{0, 0, 4, 2}, g{1, 0, 3, 4};
  CHECK(ciou(PixelBox{0, 0, 4, 2}, PixelBox{1, 0, 3, 4}) ==
        doctest::Approx(oracle::formula_ciou(p, g)).epsilon(1e-12));
  CHECK(ciou(PixelBox{0, 0, 4, 2}, PixelBox{1, 0, 3, 4}) < iou(PixelBox{0, 0, 4, 2}, PixelBox{1, 0, 3, 4}));
}

TEST_CASE("enclosing_box") {
  CHECK(enclosing_box(PixelBox{0, 0, 1, 1}, PixelBox{2, 2, 3, 3}) == PixelBox{0, 0, 3, 3});
  CHECK(enclosing_box(PixelBox{1, 1, 2, 2}, PixelBox{0, 0, 3, 3}) == PixelBox{0, 0, 3, 3});
  CHECK(enclosing_box(PixelBox{0, 0, 2, 2}, PixelBox{1, 1, 3, 3}) == PixelBox{0, 0, 3, 3});
  CHECK(enclosing_box(NormBox{0.1, 0.2, 0.3, 0.4}, NormBox{0.2, 0.1, 0.5, 0.3}) ==
        NormBox{0.1, 0.1, 0.5, 0.4});
}

TEST_CASE("metric properties on random boxes") {
  for (const auto& [ia, ib] : testing::random_pairs(2024, 1000, 64)) {
    const PixelBox a = px(ia), b = px(ib);
    const double i = iou(a, b), g = giou(a, b), c = ciou(a, b);
    CHECK(i == iou(b, a));
    CHECK(i >= 0.0);
    CHECK(i <= 1.0);
    CHECK(g <= i);
    CHECK(g > -1.0);
    CHECK(c <= i);
    CHECK(iou(a, a) == 1.0);
    CHECK(i == oracle::raster_iou(ia, ib, 64));
  }
}

TEST_CASE("ciou equals iou for concentric boxes with equal aspect ratio") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 10.0);
  for (int i = 0; i < 200; ++i) {
    const double cx = u(rng), cy = u(rng), w = u(rng), h = u(rng), s = u(rng) / 5.0;
    const PixelBox a{cx - w, cy - h, cx + w, cy + h};
    const PixelBox b{cx - s * w, cy - s * h, cx + s * w, cy + s * h};
    CHECK(ciou(a, b) == doctest::Approx(iou(a, b)).epsilon(1e-12));
  }
}

}  // TEST_SUITE
