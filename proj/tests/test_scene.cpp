#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <sstream>

#include "icsim/pgm.hpp"
#include "icsim/scene.hpp"

using namespace icsim;
using Catch::Matchers::WithinAbs;

TEST_CASE("thresholding a raster yields a binary plate", "[scene]") {
  PgmImage img;
  img.width = 3;
  img.height = 1;
  img.maxval = 255;
  img.pixels = {10, 128, 250};

  const auto map = scene::load_object(img, 128);
  CHECK(map.pixels(0, 0).amplitude == 0.0);
  CHECK(map.pixels(1, 0).amplitude == 1.0);  // at-threshold counts as clear
  CHECK(map.pixels(2, 0).amplitude == 1.0);

  CHECK_THROWS_AS(scene::load_object(img, 300), ConfigError);
  CHECK_THROWS_AS(scene::load_object(img, -1), ConfigError);
}

TEST_CASE("phase raster maps gray levels onto [0, 2pi)", "[scene]") {
  PgmImage amp;
  amp.width = 2;
  amp.height = 1;
  amp.maxval = 255;
  amp.pixels = {255, 255};

  PgmImage phase = amp;
  phase.pixels = {0, 128};

  const auto map = scene::load_object(amp, 1, &phase);
  CHECK_THAT(map.pixels(0, 0).phase, WithinAbs(0.0, 1e-15));
  CHECK_THAT(map.pixels(1, 0).phase, WithinAbs(std::numbers::pi, 1e-12));

  PgmImage wrong = phase;
  wrong.width = 1;
  wrong.pixels = {0};
  CHECK_THROWS_AS(scene::load_object(amp, 1, &wrong), ConfigError);
}

TEST_CASE("binary plates survive a PGM round trip bit-exactly", "[scene]") {
  auto plate = scene::make_glyph_plate(scene::Glyph::J, 32);
  const PgmImage img = scene::object_to_pgm(plate);

  std::stringstream buffer;
  write_pgm(buffer, img);
  const PgmImage back = read_pgm(buffer);
  const auto reloaded = scene::load_object(back, 128);

  REQUIRE(reloaded.pixels.same_shape(plate.pixels));
  for (std::size_t i = 0; i < plate.pixels.size(); ++i)
    REQUIRE(reloaded.pixels[i].amplitude == plate.pixels[i].amplitude);
}

TEST_CASE("knife edge splits the canvas at the requested column", "[scene]") {
  const auto map = scene::make_knife_edge(8, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x)
      CHECK(map.pixels(x, y).amplitude == (x >= 3 ? 1.0 : 0.0));

  CHECK_NOTHROW(scene::make_knife_edge(8, 4, 0));   // fully clear
  CHECK_NOTHROW(scene::make_knife_edge(8, 4, 8));   // fully opaque
  CHECK_THROWS_AS(scene::make_knife_edge(8, 4, 9), ConfigError);
  CHECK_THROWS_AS(scene::make_knife_edge(8, 4, -1), ConfigError);
}

TEST_CASE("inversion is an involution and tiles the canvas", "[scene]") {
  const auto plate = scene::make_glyph_plate(scene::Glyph::N, 24);
  const auto inverse = scene::invert(plate);
  const auto back = scene::invert(inverse);

  double clear_sum = 0.0;
  for (std::size_t i = 0; i < plate.pixels.size(); ++i) {
    REQUIRE(back.pixels[i].amplitude == plate.pixels[i].amplitude);
    // Plate and inverse together cover every pixel exactly once.
    clear_sum += plate.pixels[i].amplitude + inverse.pixels[i].amplitude;
  }
  CHECK_THAT(clear_sum, WithinAbs(static_cast<double>(plate.pixels.size()), 1e-9));
}

TEST_CASE("glyph plates expose a sensible stroke area", "[scene]") {
  for (auto glyph : {scene::Glyph::N, scene::Glyph::J, scene::Glyph::U}) {
    const auto plate = scene::make_glyph_plate(glyph, 64);
    const double f = scene::clear_fraction(plate);
    INFO("glyph " << static_cast<int>(glyph) << " clear fraction " << f);
    CHECK(f > 0.0);
    CHECK(f < 0.5);
  }
}

TEST_CASE("custom bitmaps must fit their canvas", "[scene]") {
  Grid<std::uint8_t> bitmap(10, 10, std::uint8_t{1});
  CHECK_NOTHROW(scene::make_glyph_plate(bitmap, 10, 10));
  CHECK_THROWS_AS(scene::make_glyph_plate(bitmap, 8, 12), ConfigError);
  CHECK_THROWS_AS(scene::make_glyph_plate(bitmap, 12, 8), ConfigError);
}

TEST_CASE("text plates place each glyph in its own cell", "[scene]") {
  std::vector<scene::GlyphRegion> regions = {
      {scene::Glyph::N, core::clear_pixel},
      {scene::Glyph::J, core::clear_pixel},
      {scene::Glyph::U, core::clear_pixel},
  };
  const auto plate = scene::make_text_plate(regions, 96, 32);

  // Every third of the canvas contains part of exactly one glyph.
  for (int cell = 0; cell < 3; ++cell) {
    int strokes = 0;
    for (int y = 0; y < 32; ++y)
      for (int x = cell * 32; x < (cell + 1) * 32; ++x)
        if (plate.pixels(x, y).amplitude > 0.5) ++strokes;
    INFO("cell " << cell);
    CHECK(strokes > 0);
  }
  CHECK_THROWS_AS(scene::make_text_plate({}, 96, 32), ConfigError);
}

TEST_CASE("glyph parsing accepts both cases", "[scene]") {
  CHECK(scene::parse_glyph('n') == scene::Glyph::N);
  CHECK(scene::parse_glyph('U') == scene::Glyph::U);
  CHECK_THROWS_AS(scene::parse_glyph('x'), ConfigError);
}

TEST_CASE("uniform emission integrates to rate times area", "[scene]") {
  const auto map = scene::uniform_emission(10, 5, 3.5);
  CHECK_THAT(map.total(), WithinAbs(10 * 5 * 3.5, 1e-9));
  CHECK_THROWS_AS(scene::uniform_emission(10, 5, -1.0), ConfigError);
}

TEST_CASE("gaussian emission peaks at the center", "[scene]") {
  const auto map = scene::gaussian_emission(33, 33, 100.0, 8.0);
  CHECK_THAT(map.rates(16, 16), WithinAbs(100.0, 1e-9));
  CHECK(map.rates(0, 0) < map.rates(16, 16));
  // Radial symmetry about the center.
  CHECK_THAT(map.rates(16 + 5, 16), WithinAbs(map.rates(16 - 5, 16), 1e-12));
  CHECK_THAT(map.rates(16, 16 + 7), WithinAbs(map.rates(16 - 7, 16), 1e-12));
  CHECK_THROWS_AS(scene::gaussian_emission(9, 9, 10.0, 0.0), ConfigError);
}

TEST_CASE("object map validation catches bad pitch and amplitudes", "[scene]") {
  auto map = scene::make_knife_edge(4, 4, 2);
  map.pixel_pitch_um = 0.0;
  CHECK_THROWS_AS(map.validate(), ConfigError);

  map = scene::make_knife_edge(4, 4, 2);
  map.pixels(0, 0).amplitude = 1.5;
  CHECK_THROWS_AS(map.validate(), ConfigError);
}
