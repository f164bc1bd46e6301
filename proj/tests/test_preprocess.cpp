#include "doctest.h"

#include <algorithm>
#include <stdexcept>

#include "ostr/error.hpp"
#include "ostr/glyph_corpus.hpp"
#include "ostr/preprocess.hpp"
#include "ostr/rng.hpp"

using namespace ostr;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
  Image img(h, w);
  Rng rng(seed);
  for (double& p : img.pixels) p = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("rotation predicate matches height > 1.5 * width on the full grid") {
  for (int h = 1; h <= 64; ++h) {
    for (int w = 1; w <= 64; ++w) {
      Image img(h, w);
      auto [out, rotated] = rotate_if_vertical(img);
      const bool expect = 2 * h > 3 * w;  // integer-exact form of h > 1.5w
      CHECK(rotated == expect);
      if (rotated) {
        CHECK(out.height == w);
        CHECK(out.width == h);
        // Never re-rotated: the output is wider than tall.
        auto [again, twice] = rotate_if_vertical(out);
        CHECK_FALSE(twice);
        CHECK(again.height == out.height);
      } else {
        CHECK(out.height == h);
        CHECK(out.width == w);
      }
    }
  }
}

TEST_CASE("rotation boundary and content") {
  CHECK(rotate_if_vertical(Image(100, 40)).second);       // 100 > 60
  CHECK_FALSE(rotate_if_vertical(Image(32, 256)).second);
  CHECK_FALSE(rotate_if_vertical(Image(48, 32)).second);  // exactly 1.5, strict

  Image tall = random_image(30, 10, 5);
  auto [out, rotated] = rotate_if_vertical(tall);
  REQUIRE(rotated);
  CHECK(out == rot90ccw(tall));
  // Pure rotation permutes pixels: sorted values are identical.
  auto a = tall.pixels, b = out.pixels;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);

  CHECK_THROWS_AS(rotate_if_vertical(Image()), std::invalid_argument);
}

TEST_CASE("resize_normalize scales to height 32 and right-pads") {
  Image in = random_image(64, 128, 9);
  int valid = 0;
  Image out = resize_normalize(in, 32, 256, &valid);
  CHECK(out.height == 32);
  CHECK(out.width == 256);
  CHECK(valid == 64);  // aspect preserved at half scale
  for (int r = 0; r < 32; ++r)
    for (int c = 64; c < 256; ++c) CHECK(out.at(r, c) == 0.0);
  // Content block equals a plain bilinear resize.
  Image ref = resize_bilinear(in, 32, 64);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 64; ++c) CHECK(out.at(r, c) == ref.at(r, c));
}

TEST_CASE("resize_normalize identity and constants") {
  Image in = random_image(32, 256, 10);
  int valid = 0;
  Image out = resize_normalize(in, 32, 256, &valid);
  CHECK(valid == 256);
  CHECK(out == in);  // exact copy when sizes already match

  Image flat(20, 77);
  for (double& p : flat.pixels) p = 0.4;
  out = resize_normalize(flat, 32, 256, &valid);
  CHECK(valid == 123);  // round(77 * 32 / 20)
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < valid; ++c)
      CHECK(out.at(r, c) == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("resize_normalize overflow and degenerate widths") {
  CHECK_THROWS_AS(resize_normalize(Image(32, 300), 32, 256, nullptr),
                  WidthOverflowError);
  CHECK_THROWS_AS(resize_normalize(Image(), 32, 256, nullptr),
                  std::invalid_argument);
  // Extremely tall slivers still produce at least one content column.
  int valid = 0;
  Image out = resize_normalize(Image(640, 1), 32, 256, &valid);
  CHECK(valid == 1);
  CHECK(out.width == 256);
}

TEST_CASE("preprocess_sample labels orientation from the rotation decision") {
  Charset cs = build_charset(6, 17);
  TextLineSample v =
      synth_text_line(cs, {0, 1, 2}, Orientation::Vertical, zero_noise(), 8);
  PreprocessedSample pv = preprocess_sample(v.image, 32, 256);
  CHECK(pv.was_rotated);
  CHECK(pv.orientation_label == Orientation::Vertical);
  CHECK(pv.image.height == 32);
  CHECK(pv.image.width == 256);
  CHECK(pv.valid_width == 96);
  // The content equals the rotated image (96x32 -> 32x96 needs no resize).
  Image rot = rot90ccw(v.image);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 96; ++c) CHECK(pv.image.at(r, c) == rot.at(r, c));

  TextLineSample h =
      synth_text_line(cs, {0, 1, 2}, Orientation::Horizontal, zero_noise(), 8);
  PreprocessedSample ph = preprocess_sample(h.image, 32, 256);
  CHECK_FALSE(ph.was_rotated);
  CHECK(ph.orientation_label == Orientation::Horizontal);
  CHECK(ph.valid_width == 96);
}
