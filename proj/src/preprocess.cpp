#include "ostr/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ostr/error.hpp"

namespace ostr {

std::pair<Image, bool> rotate_if_vertical(const Image& img,
                                          double aspect_threshold) {
  if (img.height < 1 || img.width < 1)
    throw std::invalid_argument("rotate_if_vertical needs a nonempty image");
  if (static_cast<double>(img.height) > aspect_threshold * img.width)
    return {rot90ccw(img), true};
  return {img, false};
}

Image resize_normalize(const Image& img, int canonical_height,
                       int canonical_width, int* valid_width) {
  if (img.height < 1 || img.width < 1)
    throw std::invalid_argument("resize_normalize needs a nonempty image");
  const long w = std::lround(static_cast<double>(img.width) * canonical_height /
                             img.height);
  const int content_w = std::max(1L, w);
  if (content_w > canonical_width)
    throw WidthOverflowError("width-overflow: content " +
                             std::to_string(content_w) + " exceeds canonical " +
                             std::to_string(canonical_width));
  Image resized = resize_bilinear(img, canonical_height, content_w);
  Image out(canonical_height, canonical_width);
  for (int r = 0; r < canonical_height; ++r)
    for (int c = 0; c < content_w; ++c)
      out.at(r, c) = std::clamp(resized.at(r, c), 0.0, 1.0);
  if (valid_width) *valid_width = content_w;
  return out;
}

PreprocessedSample preprocess_sample(const Image& img, int canonical_height,
                                     int canonical_width,
                                     double aspect_threshold) {
  auto [rotated, was_rotated] = rotate_if_vertical(img, aspect_threshold);
  PreprocessedSample s;
  s.was_rotated = was_rotated;
  s.orientation_label =
      was_rotated ? Orientation::Vertical : Orientation::Horizontal;
  s.image = resize_normalize(rotated, canonical_height, canonical_width,
                             &s.valid_width);
  return s;
}

}  // namespace ostr
