#pragma once

#include <utility>

#include "ostr/glyph_corpus.hpp"
#include "ostr/image.hpp"

namespace ostr {

// A text line after rotation + canonical resizing, ready for the encoder.
// valid_width is the pre-padding width so attention can mask padded columns;
// orientation_label doubles as the orientation ground truth.
struct PreprocessedSample {
  Image image;  // canonical_height x canonical_width
  bool was_rotated = false;
  Orientation orientation_label = Orientation::Horizontal;
  int valid_width = 0;
};

// Rotates 90 degrees anticlockwise when height > threshold * width
// (strict); otherwise returns the input untouched.
std::pair<Image, bool> rotate_if_vertical(const Image& img,
                                          double aspect_threshold = 1.5);

// Aspect-preserving bilinear resize to canonical_height, then right-pad
// with background (0.0) to canonical_width. valid_width receives the
// pre-padding width. Throws WidthOverflowError when the resized content is
// wider than canonical_width.
Image resize_normalize(const Image& img, int canonical_height,
                       int canonical_width, int* valid_width);

// rotate_if_vertical + resize_normalize, recording the orientation label.
PreprocessedSample preprocess_sample(const Image& img, int canonical_height,
                                     int canonical_width,
                                     double aspect_threshold = 1.5);

}  // namespace ostr
