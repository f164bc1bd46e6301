#include "ostr/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ostr/error.hpp"

namespace ostr {

bool operator==(const Image& a, const Image& b) {
  return a.height == b.height && a.width == b.width && a.pixels == b.pixels;
}

Image rot90ccw(const Image& in) {
  Image out(in.width, in.height);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c)
      out.at(r, c) = in.at(c, in.width - 1 - r);
  return out;
}

Image resize_bilinear(const Image& in, int out_h, int out_w) {
  Image out(out_h, out_w);
  const double sy = static_cast<double>(in.height) / out_h;
  const double sx = static_cast<double>(in.width) / out_w;
  for (int r = 0; r < out_h; ++r) {
    double fy = (r + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(in.height - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, in.height - 1);
    double wy = fy - y0;
    for (int c = 0; c < out_w; ++c) {
      double fx = (c + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(in.width - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, in.width - 1);
      double wx = fx - x0;
      double top = in.at(y0, x0) * (1.0 - wx) + in.at(y0, x1) * wx;
      double bot = in.at(y1, x0) * (1.0 - wx) + in.at(y1, x1) * wx;
      out.at(r, c) = std::clamp(top * (1.0 - wy) + bot * wy, 0.0, 1.0);
    }
  }
  return out;
}

void quantize8(Image& img) {
  for (double& v : img.pixels) {
    long k = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    v = static_cast<double>(k) / 255.0;
  }
}

void write_pgm(const Image& img, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DatasetWriteError("dataset-write: cannot open " + path);
  std::fprintf(f, "P5\n%d %d\n255\n", img.width, img.height);
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width));
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      long k = std::lround(std::clamp(img.at(r, c), 0.0, 1.0) * 255.0);
      row[static_cast<std::size_t>(c)] = static_cast<unsigned char>(k);
    }
    if (std::fwrite(row.data(), 1, row.size(), f) != row.size()) {
      std::fclose(f);
      throw DatasetWriteError("dataset-write: short write to " + path);
    }
  }
  std::fclose(f);
}

namespace {

int read_pnm_token(std::FILE* f) {
  // skips whitespace and '#' comments, returns a nonnegative integer
  int c = std::fgetc(f);
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = std::fgetc(f);
    } else if (std::isspace(c)) {
      c = std::fgetc(f);
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c)) return -1;
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = std::fgetc(f);
  }
  return v;
}

}  // namespace

Image read_pgm(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::invalid_argument("cannot open image " + path);
  char magic[3] = {0, 0, 0};
  if (std::fread(magic, 1, 2, f) != 2 || magic[0] != 'P' || magic[1] != '5') {
    std::fclose(f);
    throw std::invalid_argument("not a P5 PGM: " + path);
  }
  int w = read_pnm_token(f);
  int h = read_pnm_token(f);
  int maxval = read_pnm_token(f);
  if (w <= 0 || h <= 0 || maxval != 255) {
    std::fclose(f);
    throw std::invalid_argument("unsupported PGM header in " + path);
  }
  Image img(h, w);
  std::vector<unsigned char> row(static_cast<std::size_t>(w));
  for (int r = 0; r < h; ++r) {
    if (std::fread(row.data(), 1, row.size(), f) != row.size()) {
      std::fclose(f);
      throw std::invalid_argument("truncated PGM " + path);
    }
    for (int c = 0; c < w; ++c)
      img.at(r, c) = static_cast<double>(row[static_cast<std::size_t>(c)]) / 255.0;
  }
  std::fclose(f);
  return img;
}

}  // namespace ostr
