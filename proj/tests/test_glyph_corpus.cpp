#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ostr/error.hpp"
#include "ostr/glyph_corpus.hpp"
#include "ostr/image.hpp"

using namespace ostr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

double ink_coverage(const Image& img) {
  int ink = 0;
  for (double p : img.pixels) ink += p > 0.5 ? 1 : 0;
  return static_cast<double>(ink) / img.pixels.size();
}

}  // namespace

TEST_CASE("charset generation is deterministic in (classes, seed)") {
  Charset a = build_charset(6, 42);
  Charset b = build_charset(6, 42);
  REQUIRE(a.glyphs.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(a.glyphs[i].bitmap == b.glyphs[i].bitmap);

  Charset c = build_charset(6, 43);
  bool any_differ = false;
  for (int i = 0; i < 6; ++i)
    if (!(a.glyphs[i].bitmap == c.glyphs[i].bitmap)) any_differ = true;
  CHECK(any_differ);
}

TEST_CASE("charset glyphs honor the corpus invariants") {
  Charset cs = build_charset(16, 7);
  for (const GlyphSpec& g : cs.glyphs) {
    CHECK(g.bitmap.height == 32);
    CHECK(g.bitmap.width == 32);
    const double cov = ink_coverage(g.bitmap);
    CHECK(cov >= 0.10);
    CHECK(cov <= 0.60);
    // Orientation must be recoverable: a clear margin vs the glyph's own
    // quarter rotation, not just bare inequality.
    const Image rot = rot90ccw(g.bitmap);
    int big_diffs = 0;
    for (std::size_t i = 0; i < g.bitmap.pixels.size(); ++i)
      big_diffs += std::abs(g.bitmap.pixels[i] - rot.pixels[i]) > 0.25 ? 1 : 0;
    CHECK(big_diffs >= 32);
    // Bitmaps live on the 8-bit grid.
    for (double p : g.bitmap.pixels) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      CHECK(p * 255.0 == doctest::Approx(std::round(p * 255.0)).epsilon(1e-12));
    }
  }
  for (std::size_t i = 0; i < cs.glyphs.size(); ++i)
    for (std::size_t j = i + 1; j < cs.glyphs.size(); ++j)
      CHECK_FALSE(cs.glyphs[i].bitmap == cs.glyphs[j].bitmap);
}

TEST_CASE("charset size limits are enforced") {
  CHECK_THROWS_AS(build_charset(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(build_charset(4097, 0), std::invalid_argument);
}

TEST_CASE("render_printed exposes the rotation pair") {
  Charset cs = build_charset(5, 11);
  Image h = render_printed(cs, 3, false);
  Image v = render_printed(cs, 3, true);
  CHECK(v == rot90ccw(h));
  CHECK(h == cs.glyphs[3].bitmap);
  CHECK_THROWS_AS(render_printed(cs, 5, false), std::invalid_argument);
  CHECK_THROWS_AS(render_printed(cs, -1, false), std::invalid_argument);
}

TEST_CASE("noise-free single glyph line is exactly the printed glyph") {
  Charset cs = build_charset(8, 3);
  TextLineSample s =
      synth_text_line(cs, {5}, Orientation::Horizontal, zero_noise(), 99);
  CHECK(s.image.height == 32);
  CHECK(s.image.width == 32);
  CHECK(s.image == cs.glyphs[5].bitmap);
  CHECK(s.orientation == Orientation::Horizontal);
  CHECK(s.label == std::vector<int>{5});
  CHECK_FALSE(s.id.empty());
}

TEST_CASE("noise-free multi-glyph lines tile the cells exactly") {
  Charset cs = build_charset(8, 3);
  TextLineSample h =
      synth_text_line(cs, {1, 5, 2}, Orientation::Horizontal, zero_noise(), 4);
  REQUIRE(h.image.height == 32);
  REQUIRE(h.image.width == 96);
  TextLineSample v =
      synth_text_line(cs, {1, 5, 2}, Orientation::Vertical, zero_noise(), 4);
  REQUIRE(v.image.height == 96);
  REQUIRE(v.image.width == 32);
  const std::vector<int> label = {1, 5, 2};
  for (int gi = 0; gi < 3; ++gi) {
    const Image& g = cs.glyphs[label[gi]].bitmap;
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) {
        CHECK(h.image.at(r, gi * 32 + c) == g.at(r, c));
        // Vertical lines stack upright glyphs; rotation happens at test
        // time, not at synthesis time.
        CHECK(v.image.at(gi * 32 + r, c) == g.at(r, c));
      }
  }
}

TEST_CASE("synthesis is deterministic and seed-sensitive") {
  Charset cs = build_charset(8, 3);
  NoiseConfig noise;  // defaults: background, contrast, jitter all active
  TextLineSample a =
      synth_text_line(cs, {0, 7}, Orientation::Horizontal, noise, 123);
  TextLineSample b =
      synth_text_line(cs, {0, 7}, Orientation::Horizontal, noise, 123);
  CHECK(a.image == b.image);
  CHECK(a.id == b.id);
  TextLineSample c =
      synth_text_line(cs, {0, 7}, Orientation::Horizontal, noise, 124);
  CHECK_FALSE(a.image == c.image);
  for (double p : a.image.pixels) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("synthesis rejects impossible requests") {
  Charset cs = build_charset(4, 1);
  CHECK_THROWS_AS(synth_text_line(cs, {}, Orientation::Horizontal, zero_noise(), 0),
                  std::invalid_argument);
  std::vector<int> too_long(13, 0);
  CHECK_THROWS_AS(
      synth_text_line(cs, too_long, Orientation::Horizontal, zero_noise(), 0),
      std::invalid_argument);
  CHECK_THROWS_AS(synth_text_line(cs, {4}, Orientation::Horizontal, zero_noise(), 0),
                  std::invalid_argument);
  // One square glyph cannot satisfy the vertical aspect requirement.
  CHECK_THROWS_AS(synth_text_line(cs, {0}, Orientation::Vertical, zero_noise(), 0),
                  std::invalid_argument);
}

TEST_CASE("symbol table maps ids to stable fold-proof symbols") {
  SymbolTable t = SymbolTable::for_classes(40);
  CHECK(t.symbols[0] == "0");
  CHECK(t.symbols[9] == "9");
  CHECK(t.symbols[10] == "a");
  CHECK(t.symbols[35] == "z");
  CHECK(t.symbols[36] == "\xE4\xB8\x80");  // U+4E00
  CHECK(t.symbols[39] == "\xE4\xB8\x83");  // U+4E03
  const std::vector<int> label = {3, 12, 36};
  CHECK(t.decode(t.encode(label)) == label);
  CHECK(t.encode(label) == "3c\xE4\xB8\x80");
  CHECK_THROWS_AS(t.decode("A"), std::invalid_argument);  // uppercase unused
  CHECK_THROWS_AS(t.encode({40}), std::invalid_argument);

  const std::string path = "symtab_test.tmp";
  t.write_tsv(path);
  SymbolTable back = SymbolTable::read_tsv(path);
  CHECK(back.symbols == t.symbols);
  fs::remove(path);
  CHECK_THROWS_AS(SymbolTable::read_tsv(path), std::invalid_argument);
}

TEST_CASE("manifest round-trips through disk") {
  DatasetManifest m;
  m.records.push_back({"images/a.pgm", "ab", Orientation::Horizontal, ""});
  m.records.push_back({"images/b.pgm", "\xE4\xB8\x80z", Orientation::Vertical,
                       "multi-line,oblique"});
  const std::string path = "manifest_test.tmp";
  write_manifest(m, path);
  DatasetManifest back = read_manifest(path);
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].image_path == "images/a.pgm");
  CHECK(back.records[0].label == "ab");
  CHECK(back.records[0].orientation == Orientation::Horizontal);
  CHECK(back.records[0].flags.empty());
  CHECK(back.records[1].orientation == Orientation::Vertical);
  CHECK(back.records[1].flags == "multi-line,oblique");
  fs::remove(path);

  {
    std::ofstream f(path);
    f << "x.pgm\tab\tQ\n";
  }
  CHECK_THROWS_AS(read_manifest(path), std::invalid_argument);
  {
    std::ofstream f(path);
    f << "x.pgm\tab\n";
  }
  CHECK_THROWS_AS(read_manifest(path), std::invalid_argument);
  fs::remove(path);
  CHECK_THROWS_AS(read_manifest(path), std::invalid_argument);
}

TEST_CASE("vertical testset keeps only clean vertical records") {
  DatasetManifest m;
  m.records.push_back({"v0.pgm", "ab", Orientation::Vertical, ""});
  m.records.push_back({"v1.pgm", "cd", Orientation::Vertical, "multi-line"});
  m.records.push_back({"h0.pgm", "ef", Orientation::Horizontal, ""});
  m.records.push_back({"v2.pgm", "gh", Orientation::Vertical, "curved"});
  m.records.push_back({"v3.pgm", "ij", Orientation::Vertical, "oblique"});
  m.records.push_back({"v4.pgm", "kl", Orientation::Vertical, "unrecognizable"});
  DatasetManifest v = build_vertical_testset(m);
  REQUIRE(v.records.size() == 2);
  CHECK(v.records[0].image_path == "v0.pgm");
  CHECK(v.records[1].image_path == "v2.pgm");  // unknown flag does not disqualify
}

TEST_CASE("generated datasets have the requested shape and reproduce byte-for-byte") {
  Charset cs = build_charset(6, 21);
  const std::string dir1 = "corpus_tmp1";
  const std::string dir2 = "corpus_tmp2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  DatasetCounts counts{10, 4, 4};
  DatasetFiles files =
      generate_dataset(cs, counts, 0.5, 5, dir1, NoiseConfig{}, 1, 3);

  REQUIRE(static_cast<int>(files.train.records.size()) == counts.train);
  REQUIRE(static_cast<int>(files.val.records.size()) == counts.val);
  REQUIRE(static_cast<int>(files.test.records.size()) == counts.test);

  SymbolTable symtab = SymbolTable::read_tsv(files.charset_path);
  REQUIRE(static_cast<int>(symtab.symbols.size()) == cs.num_classes);

  int vertical = 0;
  for (const ManifestRecord& rec : files.train.records) {
    vertical += rec.orientation == Orientation::Vertical ? 1 : 0;
    TextLineSample s = load_sample(
        files.train, static_cast<int>(&rec - files.train.records.data()), symtab);
    const int len = static_cast<int>(s.label.size());
    CHECK(len >= 1);
    CHECK(len <= 3);
    if (rec.orientation == Orientation::Vertical) {
      CHECK(len >= 2);
      CHECK(s.image.height == 32 * len);
      CHECK(s.image.width == 32);
    } else {
      CHECK(s.image.height == 32);
      CHECK(s.image.width == 32 * len);
    }
  }
  CHECK(vertical == 5);  // round(0.5 * 10)
  validate_manifest(files.train);
  validate_manifest(files.val);

  // The on-disk manifest equals the in-memory one.
  DatasetManifest reread = read_manifest(dir1 + "/train.tsv");
  REQUIRE(reread.records.size() == files.train.records.size());
  for (std::size_t i = 0; i < reread.records.size(); ++i) {
    CHECK(reread.records[i].image_path == files.train.records[i].image_path);
    CHECK(reread.records[i].label == files.train.records[i].label);
    CHECK(reread.records[i].orientation == files.train.records[i].orientation);
  }

  // Regeneration with the same inputs is byte-identical.
  generate_dataset(cs, counts, 0.5, 5, dir2, NoiseConfig{}, 1, 3);
  CHECK(slurp(dir1 + "/train.tsv") == slurp(dir2 + "/train.tsv"));
  CHECK(slurp(dir1 + "/val.tsv") == slurp(dir2 + "/val.tsv"));
  CHECK(slurp(dir1 + "/charset.tsv") == slurp(dir2 + "/charset.tsv"));
  CHECK(slurp(dir1 + "/" + files.train.records[0].image_path) ==
        slurp(dir2 + "/" + files.train.records[0].image_path));

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("vertical fraction endpoints and argument checks") {
  Charset cs = build_charset(4, 2);
  const std::string dir = "corpus_tmp3";
  fs::remove_all(dir);
  DatasetFiles none =
      generate_dataset(cs, {6, 0, 0}, 0.0, 9, dir, zero_noise(), 1, 2);
  for (const ManifestRecord& rec : none.train.records)
    CHECK(rec.orientation == Orientation::Horizontal);
  fs::remove_all(dir);

  DatasetFiles all =
      generate_dataset(cs, {6, 0, 0}, 1.0, 9, dir, zero_noise(), 1, 2);
  for (const ManifestRecord& rec : all.train.records)
    CHECK(rec.orientation == Orientation::Vertical);
  fs::remove_all(dir);

  CHECK_THROWS_AS(generate_dataset(cs, {1, 0, 0}, -0.1, 0, dir, zero_noise()),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_dataset(cs, {1, 0, 0}, 1.1, 0, dir, zero_noise()),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_dataset(cs, {-1, 0, 0}, 0.5, 0, dir, zero_noise()),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_dataset(cs, {1, 0, 0}, 0.5, 0, dir, zero_noise(), 2, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_dataset(cs, {1, 0, 0}, 0.5, 0, dir, zero_noise(), 0, 13),
                  std::invalid_argument);
}

TEST_CASE("validate_manifest rejects missing files and wrong aspects") {
  DatasetManifest m;
  m.base_dir = ".";
  m.records.push_back({"no_such_file.pgm", "a", Orientation::Horizontal, ""});
  CHECK_THROWS_AS(validate_manifest(m), std::invalid_argument);

  Image tall(64, 32);
  write_pgm(tall, "tall_test.tmp.pgm");
  m.records.clear();
  m.records.push_back({"tall_test.tmp.pgm", "ab", Orientation::Horizontal, ""});
  CHECK_THROWS_AS(validate_manifest(m), std::invalid_argument);
  m.records[0].orientation = Orientation::Vertical;
  validate_manifest(m);  // 64 > 1.5 * 32: fine

  Image square(32, 32);
  write_pgm(square, "square_test.tmp.pgm");
  m.records[0] = {"square_test.tmp.pgm", "a", Orientation::Vertical, ""};
  CHECK_THROWS_AS(validate_manifest(m), std::invalid_argument);
  m.records[0].orientation = Orientation::Horizontal;
  validate_manifest(m);

  m.records[0].label = "";
  CHECK_THROWS_AS(validate_manifest(m), std::invalid_argument);
  fs::remove("tall_test.tmp.pgm");
  fs::remove("square_test.tmp.pgm");
}
