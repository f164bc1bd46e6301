#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ostr/config.hpp"

using namespace ostr;

TEST_CASE("defaults carry the documented settings") {
  RunConfig c = RunConfig::defaults();
  CHECK(c.get_int("seed") == 1);
  CHECK(c.get_int("preprocess.canonical_height") == 32);
  CHECK(c.get_int("preprocess.canonical_width") == 256);
  CHECK(c.get_double("preprocess.vertical_aspect_threshold") == doctest::Approx(1.5));
  CHECK(c.get_double("loss.gamma") == doctest::Approx(5.0));
  CHECK(c.get_double("train.learning_rate") == doctest::Approx(1.0));
  CHECK(c.get_double("train.rho") == doctest::Approx(0.9));
  CHECK(c.get_double("train.weight_decay") == doctest::Approx(1e-4));
  CHECK(c.get_bool("rotation.enabled"));
  CHECK(c.get_bool("loss.use_lr"));
  CHECK(c.get_int("decoder.num_heads") == 4);
  CHECK(c.get_int("decoder.max_steps") == 14);
}

TEST_CASE("merge_line overrides, trims and skips comments") {
  RunConfig c = RunConfig::defaults();
  c.merge_line("  loss.gamma = 2.5  # reduced weight");
  c.merge_line("# full-line comment");
  c.merge_line("");
  CHECK(c.get_double("loss.gamma") == doctest::Approx(2.5));
  CHECK_THROWS_AS(c.merge_line("no equals sign"), std::invalid_argument);
  CHECK_THROWS_AS(c.merge_line("=5"), std::invalid_argument);
}

TEST_CASE("typed getters parse strictly") {
  RunConfig c;
  c.set("k", "12x");
  CHECK_THROWS_AS(c.get_int("k"), std::invalid_argument);
  CHECK_THROWS_AS(c.get_double("k"), std::invalid_argument);
  c.set("k", "12");
  CHECK(c.get_int("k") == 12);
  c.set("k", "1e-3");
  CHECK(c.get_double("k") == doctest::Approx(1e-3));
  CHECK_THROWS_AS(c.get_int("k"), std::invalid_argument);
  c.set("k", "maybe");
  CHECK_THROWS_AS(c.get_bool("k"), std::invalid_argument);
  c.set("k", "true");
  CHECK(c.get_bool("k"));
  CHECK_THROWS_AS(c.get_str("missing"), std::invalid_argument);
  CHECK_FALSE(c.has("missing"));
}

TEST_CASE("serialize/parse round-trips sorted") {
  RunConfig c = RunConfig::defaults();
  c.set("zzz.last", "9");
  std::string text = c.serialize();
  RunConfig back = RunConfig::parse(text);
  CHECK(back.entries() == c.entries());
  CHECK(back.serialize() == text);
  // Sorted: the first serialized key precedes the last alphabetically.
  CHECK(text.find("cirn.c1") < text.find("zzz.last"));
}

TEST_CASE("load_file applies overrides on top of defaults") {
  const char* path = "cfg_test.tmp";
  {
    std::ofstream f(path);
    f << "# overrides\n";
    f << "train.batch_size=4\n";
    f << "loss.alpha = 0.5\n";
  }
  RunConfig c = RunConfig::defaults();
  c.load_file(path);
  CHECK(c.get_int("train.batch_size") == 4);
  CHECK(c.get_double("loss.alpha") == doctest::Approx(0.5));
  CHECK(c.get_int("train.steps") == 2000);  // untouched default
  std::remove(path);
  CHECK_THROWS_AS(c.load_file("definitely_missing.cfg"), std::invalid_argument);
}
