#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ostr/image.hpp"

namespace ostr {

enum class Orientation { Horizontal, Vertical };

inline char orientation_tag(Orientation o) {
  return o == Orientation::Horizontal ? 'H' : 'V';
}

// A procedurally generated 32x32 glyph. Bitmaps are quantized to the 8-bit
// grid so disk round-trips are exact.
struct GlyphSpec {
  int class_id = 0;
  Image bitmap;  // 32x32, ink high
};

struct Charset {
  int num_classes = 0;
  std::vector<GlyphSpec> glyphs;
  std::uint64_t seed = 0;
};

// Maps class ids to printable symbols for manifests: digits, then lowercase
// letters, then CJK ideographs from U+4E00 (all survive case folding
// unchanged, so normalization cannot merge two classes).
struct SymbolTable {
  std::vector<std::string> symbols;         // id -> UTF-8 symbol
  std::map<std::string, int> to_id;

  static SymbolTable for_classes(int num_classes);
  static SymbolTable read_tsv(const std::string& path);
  void write_tsv(const std::string& path) const;

  std::string encode(const std::vector<int>& label) const;
  std::vector<int> decode(const std::string& text) const;
};

struct NoiseConfig {
  double background = 0.15;  // max background intensity
  double contrast = 0.3;     // max ink dimming
  double jitter = 0.5;       // max sub-pixel glyph offset
};

inline NoiseConfig zero_noise() { return NoiseConfig{0.0, 0.0, 0.0}; }

struct TextLineSample {
  Image image;
  std::vector<int> label;
  Orientation orientation = Orientation::Horizontal;
  std::string id;
};

struct ManifestRecord {
  std::string image_path;  // relative to the manifest's directory
  std::string label;       // symbol string
  Orientation orientation = Orientation::Horizontal;
  std::string flags;       // optional fourth column, preserved verbatim
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::string charset_ref;  // path of the symbol table, informational
  std::string base_dir;     // directory the image paths are relative to
};

// glyph generation ---------------------------------------------------------

// Deterministic in (num_classes, seed). Every glyph has 10-60% ink coverage,
// differs from its own 90-degree rotation by a clear margin, and all bitmaps
// are pairwise distinct.
Charset build_charset(int num_classes, std::uint64_t seed);

// rotated=false: the stored bitmap (the horizontal target); rotated=true:
// its 90-degree anticlockwise rotation (the vertical target).
Image render_printed(const Charset& cs, int class_id, bool rotated);

// line synthesis -----------------------------------------------------------

// Horizontal: 32 x (32*len) left-to-right; Vertical: (32*len) x 32 upright
// glyphs stacked top-to-bottom. Noise = background level + contrast dimming
// + per-glyph sub-pixel jitter, all drawn from `seed`. Output is quantized.
TextLineSample synth_text_line(const Charset& cs, const std::vector<int>& label,
                               Orientation orientation, const NoiseConfig& noise,
                               std::uint64_t seed);

// dataset construction -----------------------------------------------------

struct DatasetCounts {
  int train = 0;
  int val = 0;
  int test = 0;
};

struct DatasetFiles {
  DatasetManifest train;
  DatasetManifest val;
  DatasetManifest test;
  std::string charset_path;
};

// Writes images (P5 PGM), per-split manifests and the symbol table under
// out_dir. Per split, round(vertical_fraction * count) samples are vertical.
// Label lengths are drawn uniformly in [len_min, len_max].
DatasetFiles generate_dataset(const Charset& cs, const DatasetCounts& counts,
                              double vertical_fraction, std::uint64_t seed,
                              const std::string& out_dir,
                              const NoiseConfig& noise = NoiseConfig{},
                              int len_min = 1, int len_max = 4);

// Keeps exactly the vertical records that carry no disqualifying flag
// (multi-line / oblique / unrecognizable). Warns if nothing survives.
DatasetManifest build_vertical_testset(const DatasetManifest& manifest);

// manifest I/O -------------------------------------------------------------

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Throws if a referenced image is missing or has an impossible shape for its
// orientation tag.
void validate_manifest(const DatasetManifest& manifest);

// Loads a record's image and decodes its label to class ids.
TextLineSample load_sample(const DatasetManifest& manifest, int index,
                           const SymbolTable& symtab);

}  // namespace ostr
