#include "ostr/glyph_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ostr/error.hpp"
#include "ostr/rng.hpp"
#include "ostr/text.hpp"

namespace fs = std::filesystem;

namespace ostr {

namespace {

constexpr int kGlyphSize = 32;
constexpr int kMaxLabelLen = 12;

double dist_to_segment(double px, double py, double x0, double y0, double x1,
                       double y1) {
  const double dx = x1 - x0, dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = x0 + t * dx, cy = y0 + t * dy;
  return std::hypot(px - cx, py - cy);
}

// Random strokes with distance-based anti-aliased edges, combined by max.
Image draw_glyph_candidate(Rng& rng) {
  Image img(kGlyphSize, kGlyphSize);
  const int strokes = rng.uniform_int(3, 6);
  for (int s = 0; s < strokes; ++s) {
    double x0, y0, x1, y1;
    do {
      x0 = rng.uniform(4.0, 28.0);
      y0 = rng.uniform(4.0, 28.0);
      x1 = rng.uniform(4.0, 28.0);
      y1 = rng.uniform(4.0, 28.0);
    } while (std::hypot(x1 - x0, y1 - y0) < 8.0);
    const double radius = rng.uniform(1.1, 1.7);
    for (int r = 0; r < kGlyphSize; ++r) {
      for (int c = 0; c < kGlyphSize; ++c) {
        const double d =
            dist_to_segment(c + 0.5, r + 0.5, x0, y0, x1, y1);
        const double v = std::clamp(radius + 0.5 - d, 0.0, 1.0);
        img.at(r, c) = std::max(img.at(r, c), v);
      }
    }
  }
  quantize8(img);
  return img;
}

double coverage(const Image& img) {
  int ink = 0;
  for (double p : img.pixels) ink += p > 0.5 ? 1 : 0;
  return static_cast<double>(ink) / img.pixels.size();
}

// Requires a clear margin, not bare inequality, so orientation stays
// learnable after mild noise.
bool clearly_asymmetric(const Image& img) {
  const Image rot = rot90ccw(img);
  int diff = 0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    diff += std::abs(img.pixels[i] - rot.pixels[i]) > 0.25 ? 1 : 0;
  return diff >= 32;
}

// Bilinear read with zero padding outside the glyph.
double sample_glyph(const Image& g, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double dy = y - y0, dx = x - x0;
  auto px = [&g](int r, int c) {
    return (r < 0 || r >= g.height || c < 0 || c >= g.width) ? 0.0 : g.at(r, c);
  };
  return px(y0, x0) * (1 - dy) * (1 - dx) + px(y0, x0 + 1) * (1 - dy) * dx +
         px(y0 + 1, x0) * dy * (1 - dx) + px(y0 + 1, x0 + 1) * dy * dx;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool flag_disqualifies(const std::string& flags) {
  if (flags.empty()) return false;
  std::istringstream in(flags);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok == "multi-line" || tok == "oblique" || tok == "unrecognizable")
      return true;
  }
  return false;
}

}  // namespace

// --------------------------------------------------------------------------
// symbol table
// --------------------------------------------------------------------------

SymbolTable SymbolTable::for_classes(int num_classes) {
  SymbolTable t;
  for (int id = 0; id < num_classes; ++id) {
    std::string sym;
    if (id < 10)
      sym.push_back(static_cast<char>('0' + id));
    else if (id < 36)
      sym.push_back(static_cast<char>('a' + id - 10));
    else
      utf8_append(sym, 0x4E00u + static_cast<std::uint32_t>(id - 36));
    t.symbols.push_back(sym);
    t.to_id[sym] = id;
  }
  return t;
}

SymbolTable SymbolTable::read_tsv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open symbol table " + path);
  SymbolTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2)
      throw std::invalid_argument("bad symbol table line " +
                                  std::to_string(lineno) + " in " + path);
    const int id = std::stoi(fields[0]);
    if (id != static_cast<int>(t.symbols.size()))
      throw std::invalid_argument("non-contiguous class ids in " + path);
    t.symbols.push_back(fields[1]);
    t.to_id[fields[1]] = id;
  }
  return t;
}

void SymbolTable::write_tsv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DatasetWriteError("dataset-write: cannot open " + path);
  for (std::size_t id = 0; id < symbols.size(); ++id)
    f << id << '\t' << symbols[id] << '\n';
  if (!f) throw DatasetWriteError("dataset-write: short write to " + path);
}

std::string SymbolTable::encode(const std::vector<int>& label) const {
  std::string out;
  for (int id : label) {
    if (id < 0 || id >= static_cast<int>(symbols.size()))
      throw std::invalid_argument("class id out of range: " + std::to_string(id));
    out += symbols[id];
  }
  return out;
}

std::vector<int> SymbolTable::decode(const std::string& text) const {
  std::vector<int> out;
  for (std::uint32_t cp : utf8_decode(text)) {
    std::string sym;
    utf8_append(sym, cp);
    auto it = to_id.find(sym);
    if (it == to_id.end())
      throw std::invalid_argument("symbol not in charset: " + sym);
    out.push_back(it->second);
  }
  return out;
}

// --------------------------------------------------------------------------
// charset generation
// --------------------------------------------------------------------------

Charset build_charset(int num_classes, std::uint64_t seed) {
  if (num_classes < 2 || num_classes > 4096)
    throw std::invalid_argument("num_classes must be in [2, 4096], got " +
                                std::to_string(num_classes));
  Charset cs;
  cs.num_classes = num_classes;
  cs.seed = seed;
  Rng rng(mix_seed(seed, hash_str("charset")));
  for (int id = 0; id < num_classes; ++id) {
    constexpr int kMaxAttempts = 50000;
    int attempt = 0;
    while (true) {
      if (++attempt > kMaxAttempts)
        throw std::runtime_error("glyph rejection sampling did not converge");
      Image candidate = draw_glyph_candidate(rng);
      const double cov = coverage(candidate);
      if (cov < 0.10 || cov > 0.60) continue;
      if (!clearly_asymmetric(candidate)) continue;
      bool duplicate = false;
      for (const GlyphSpec& g : cs.glyphs)
        if (g.bitmap == candidate) {
          duplicate = true;
          break;
        }
      if (duplicate) continue;
      cs.glyphs.push_back(GlyphSpec{id, std::move(candidate)});
      break;
    }
  }
  return cs;
}

Image render_printed(const Charset& cs, int class_id, bool rotated) {
  if (class_id < 0 || class_id >= cs.num_classes)
    throw std::invalid_argument("unknown class id " + std::to_string(class_id));
  const Image& bitmap = cs.glyphs[class_id].bitmap;
  return rotated ? rot90ccw(bitmap) : bitmap;
}

// --------------------------------------------------------------------------
// line synthesis
// --------------------------------------------------------------------------

TextLineSample synth_text_line(const Charset& cs, const std::vector<int>& label,
                               Orientation orientation, const NoiseConfig& noise,
                               std::uint64_t seed) {
  const int len = static_cast<int>(label.size());
  if (len < 1 || len > kMaxLabelLen)
    throw std::invalid_argument("label length must be in [1, 12], got " +
                                std::to_string(len));
  for (int id : label)
    if (id < 0 || id >= cs.num_classes)
      throw std::invalid_argument("label references unknown class " +
                                  std::to_string(id));
  // A one-glyph vertical canvas would be square, which cannot satisfy the
  // vertical aspect requirement (height > 1.5 * width).
  if (orientation == Orientation::Vertical && len < 2)
    throw std::invalid_argument("vertical lines need at least 2 characters");

  const bool horizontal = orientation == Orientation::Horizontal;
  Image img(horizontal ? kGlyphSize : kGlyphSize * len,
            horizontal ? kGlyphSize * len : kGlyphSize);

  Rng rng(mix_seed(seed, hash_str("synth")));
  const double background = rng.uniform(0.0, noise.background);
  const double contrast = 1.0 - rng.uniform(0.0, noise.contrast);

  for (int gi = 0; gi < len; ++gi) {
    const double dx = rng.uniform(-noise.jitter, noise.jitter);
    const double dy = rng.uniform(-noise.jitter, noise.jitter);
    const Image& glyph = cs.glyphs[label[gi]].bitmap;
    const int row0 = horizontal ? 0 : gi * kGlyphSize;
    const int col0 = horizontal ? gi * kGlyphSize : 0;
    for (int r = 0; r < kGlyphSize; ++r) {
      for (int c = 0; c < kGlyphSize; ++c) {
        const double ink =
            (dx == 0.0 && dy == 0.0 ? glyph.at(r, c)
                                    : sample_glyph(glyph, r - dy, c - dx)) *
            contrast;
        img.at(row0 + r, col0 + c) = ink + background * (1.0 - ink);
      }
    }
  }
  quantize8(img);

  TextLineSample sample;
  sample.image = std::move(img);
  sample.label = label;
  sample.orientation = orientation;
  char idbuf[32];
  std::snprintf(idbuf, sizeof(idbuf), "%c%016llx", orientation_tag(orientation),
                static_cast<unsigned long long>(seed));
  sample.id = idbuf;
  return sample;
}

// --------------------------------------------------------------------------
// dataset construction
// --------------------------------------------------------------------------

namespace {

DatasetManifest generate_split(const Charset& cs, const SymbolTable& symtab,
                               const char* split, int count,
                               double vertical_fraction, std::uint64_t split_seed,
                               const std::string& out_dir,
                               const NoiseConfig& noise, int len_min,
                               int len_max) {
  DatasetManifest m;
  m.base_dir = out_dir;
  m.charset_ref = "charset.tsv";
  const fs::path img_dir = fs::path(out_dir) / "images" / split;
  std::error_code ec;
  fs::create_directories(img_dir, ec);
  if (ec)
    throw DatasetWriteError("dataset-write: cannot create " + img_dir.string());

  const long n_v = std::lround(vertical_fraction * count);
  long v_emitted = 0;
  for (int i = 0; i < count; ++i) {
    // Spread the vertical samples evenly through the split.
    const bool vertical =
        (i + 1) * n_v / count > v_emitted && v_emitted < n_v;
    if (vertical) ++v_emitted;

    const std::uint64_t sample_seed = mix_seed(split_seed, i);
    Rng rng(mix_seed(sample_seed, hash_str("label")));
    const int lo = vertical ? std::max(2, len_min) : len_min;
    const int len = rng.uniform_int(lo, std::max(lo, len_max));
    std::vector<int> label(len);
    for (int& id : label) id = rng.uniform_int(0, cs.num_classes - 1);

    TextLineSample sample = synth_text_line(
        cs, label, vertical ? Orientation::Vertical : Orientation::Horizontal,
        noise, sample_seed);

    char name[32];
    std::snprintf(name, sizeof(name), "%06d.pgm", i);
    const fs::path rel = fs::path("images") / split / name;
    write_pgm(sample.image, (fs::path(out_dir) / rel).string());

    ManifestRecord rec;
    rec.image_path = rel.generic_string();
    rec.label = symtab.encode(label);
    rec.orientation = sample.orientation;
    m.records.push_back(std::move(rec));
  }
  return m;
}

}  // namespace

DatasetFiles generate_dataset(const Charset& cs, const DatasetCounts& counts,
                              double vertical_fraction, std::uint64_t seed,
                              const std::string& out_dir,
                              const NoiseConfig& noise, int len_min,
                              int len_max) {
  if (vertical_fraction < 0.0 || vertical_fraction > 1.0)
    throw std::invalid_argument("vertical_fraction must be in [0, 1]");
  if (counts.train < 0 || counts.val < 0 || counts.test < 0)
    throw std::invalid_argument("split counts must be non-negative");
  if (len_min < 1 || len_max > kMaxLabelLen || len_min > len_max)
    throw std::invalid_argument("label length range must satisfy 1 <= min <= max <= 12");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DatasetWriteError("dataset-write: cannot create " + out_dir);

  SymbolTable symtab = SymbolTable::for_classes(cs.num_classes);
  DatasetFiles files;
  files.charset_path = (fs::path(out_dir) / "charset.tsv").string();
  symtab.write_tsv(files.charset_path);

  files.train = generate_split(cs, symtab, "train", counts.train,
                               vertical_fraction, mix_seed(seed, hash_str("train")),
                               out_dir, noise, len_min, len_max);
  files.val = generate_split(cs, symtab, "val", counts.val, vertical_fraction,
                             mix_seed(seed, hash_str("val")), out_dir, noise,
                             len_min, len_max);
  files.test = generate_split(cs, symtab, "test", counts.test, vertical_fraction,
                              mix_seed(seed, hash_str("test")), out_dir, noise,
                              len_min, len_max);

  write_manifest(files.train, (fs::path(out_dir) / "train.tsv").string());
  write_manifest(files.val, (fs::path(out_dir) / "val.tsv").string());
  write_manifest(files.test, (fs::path(out_dir) / "test.tsv").string());
  return files;
}

DatasetManifest build_vertical_testset(const DatasetManifest& manifest) {
  DatasetManifest out;
  out.charset_ref = manifest.charset_ref;
  out.base_dir = manifest.base_dir;
  for (const ManifestRecord& rec : manifest.records) {
    if (rec.orientation != Orientation::Vertical) continue;
    if (flag_disqualifies(rec.flags)) continue;
    out.records.push_back(rec);
  }
  if (out.records.empty())
    std::fprintf(stderr,
                 "warning: vertical test split is empty (no usable vertical "
                 "records)\n");
  return out;
}

// --------------------------------------------------------------------------
// manifest I/O
// --------------------------------------------------------------------------

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DatasetWriteError("dataset-write: cannot open " + path);
  for (const ManifestRecord& rec : manifest.records) {
    f << rec.image_path << '\t' << rec.label << '\t'
      << orientation_tag(rec.orientation);
    if (!rec.flags.empty()) f << '\t' << rec.flags;
    f << '\n';
  }
  if (!f) throw DatasetWriteError("dataset-write: short write to " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open manifest " + path);
  DatasetManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  if (m.base_dir.empty()) m.base_dir = ".";
  const fs::path charset = fs::path(m.base_dir) / "charset.tsv";
  if (fs::exists(charset)) m.charset_ref = "charset.tsv";
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3 && fields.size() != 4)
      throw std::invalid_argument("manifest line " + std::to_string(lineno) +
                                  " has " + std::to_string(fields.size()) +
                                  " fields (want 3 or 4) in " + path);
    ManifestRecord rec;
    rec.image_path = fields[0];
    rec.label = fields[1];
    if (fields[2] == "H")
      rec.orientation = Orientation::Horizontal;
    else if (fields[2] == "V")
      rec.orientation = Orientation::Vertical;
    else
      throw std::invalid_argument("bad orientation '" + fields[2] + "' at line " +
                                  std::to_string(lineno) + " in " + path);
    if (fields.size() == 4) rec.flags = fields[3];
    m.records.push_back(std::move(rec));
  }
  return m;
}

void validate_manifest(const DatasetManifest& manifest) {
  for (const ManifestRecord& rec : manifest.records) {
    if (rec.label.empty())
      throw std::invalid_argument("manifest record with empty label: " +
                                  rec.image_path);
    const std::string full =
        (fs::path(manifest.base_dir) / rec.image_path).string();
    const Image img = read_pgm(full);
    if (rec.orientation == Orientation::Vertical) {
      if (2 * img.height <= 3 * img.width)
        throw std::invalid_argument("vertical record without vertical aspect: " +
                                    rec.image_path);
    } else if (img.width < img.height) {
      throw std::invalid_argument("horizontal record taller than wide: " +
                                  rec.image_path);
    }
  }
}

TextLineSample load_sample(const DatasetManifest& manifest, int index,
                           const SymbolTable& symtab) {
  if (index < 0 || index >= static_cast<int>(manifest.records.size()))
    throw std::invalid_argument("manifest index out of range");
  const ManifestRecord& rec = manifest.records[index];
  TextLineSample s;
  s.image = read_pgm((fs::path(manifest.base_dir) / rec.image_path).string());
  s.label = symtab.decode(rec.label);
  s.orientation = rec.orientation;
  s.id = rec.image_path;
  return s;
}

}  // namespace ostr
