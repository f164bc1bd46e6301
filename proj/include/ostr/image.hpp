#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ostr {

// Grayscale image, values in [0,1], row-major, ink = high.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, 0.0) {}

  double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
};

bool operator==(const Image& a, const Image& b);

// 90 degrees anticlockwise: output shape W x H, top row of the output comes
// from the rightmost input column.
Image rot90ccw(const Image& in);

// Bilinear resample with half-pixel-center sampling; preserves constants and
// is an exact copy when sizes match.
Image resize_bilinear(const Image& in, int out_h, int out_w);

// Snap every pixel to the 8-bit grid k/255 so disk round-trips are
// bit-identical.
void quantize8(Image& img);

// Binary PGM ("P5", maxval 255), row-major, value v stored as round(255*v).
void write_pgm(const Image& img, const std::string& path);
Image read_pgm(const std::string& path);

}  // namespace ostr
