#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "icsim/core.hpp"
#include "icsim/grid.hpp"
#include "icsim/pgm.hpp"

namespace icsim::scene {

using core::PixelTransmission;

/// Per-pixel complex transmission of the object plate.
struct ObjectMap {
  Grid<PixelTransmission> pixels;
  double pixel_pitch_um = 13.0;

  int width() const { return pixels.width(); }
  int height() const { return pixels.height(); }

  void validate() const {
    if (pixel_pitch_um <= 0.0) throw ConfigError("object map: pixel pitch must be > 0");
    for (const auto& p : pixels.data()) p.validate();
  }
};

/// Per-pixel pair-emission rate of the source, counts/s.
struct EmissionMap {
  Grid<double> rates;

  int width() const { return rates.width(); }
  int height() const { return rates.height(); }

  double total() const {
    double sum = 0.0;
    for (double r : rates.data()) sum += r;
    return sum;
  }

  void validate() const {
    for (double r : rates.data())
      if (r < 0.0 || !std::isfinite(r)) throw ConfigError("emission map: rates must be >= 0");
  }
};

/// Thresholds a grayscale raster into a binary transmission map: samples at
/// or above the threshold become clear (t = 1), the rest opaque. An optional
/// phase raster of the same shape maps [0, maxval] linearly onto [0, 2*pi).
inline ObjectMap load_object(const PgmImage& amplitude, int threshold,
                             const PgmImage* phase = nullptr, double pixel_pitch_um = 13.0) {
  if (threshold < 0 || threshold > amplitude.maxval)
    throw ConfigError("load_object: threshold outside raster bit depth");
  if (phase && (phase->width != amplitude.width || phase->height != amplitude.height))
    throw ConfigError("load_object: phase raster dimensions differ from amplitude raster");

  ObjectMap map;
  map.pixel_pitch_um = pixel_pitch_um;
  map.pixels = Grid<PixelTransmission>(amplitude.width, amplitude.height);
  for (std::size_t i = 0; i < amplitude.pixels.size(); ++i) {
    const double t = amplitude.pixels[i] >= threshold ? 1.0 : 0.0;
    double delta = 0.0;
    if (phase)
      delta = core::two_pi * phase->pixels[i] / (static_cast<double>(phase->maxval) + 1.0);
    map.pixels[i] = PixelTransmission{t, delta};
  }
  return map;
}

inline ObjectMap load_object_file(const std::filesystem::path& amplitude_path, int threshold,
                                  const std::optional<std::filesystem::path>& phase_path = {},
                                  double pixel_pitch_um = 13.0) {
  const PgmImage amp = read_pgm(amplitude_path);
  if (phase_path) {
    const PgmImage ph = read_pgm(*phase_path);
    return load_object(amp, threshold, &ph, pixel_pitch_um);
  }
  return load_object(amp, threshold, nullptr, pixel_pitch_um);
}

/// Re-emits the transmission amplitudes as a grayscale raster
/// (t mapped linearly onto [0, maxval]).
inline PgmImage object_to_pgm(const ObjectMap& map, int maxval = 255) {
  PgmImage img;
  img.width = map.width();
  img.height = map.height();
  img.maxval = maxval;
  img.pixels.resize(map.pixels.size());
  for (std::size_t i = 0; i < map.pixels.size(); ++i)
    img.pixels[i] = static_cast<std::uint16_t>(std::lround(map.pixels[i].amplitude * maxval));
  return img;
}

/// Vertical knife edge: columns left of edge_col opaque, the rest clear.
inline ObjectMap make_knife_edge(int width, int height, int edge_col,
                                 double pixel_pitch_um = 13.0) {
  if (edge_col < 0 || edge_col > width)
    throw ConfigError("make_knife_edge: edge column out of range");
  ObjectMap map;
  map.pixel_pitch_um = pixel_pitch_um;
  map.pixels = Grid<PixelTransmission>(width, height, core::opaque_pixel);
  for (int y = 0; y < height; ++y)
    for (int x = edge_col; x < width; ++x) map.pixels(x, y) = core::clear_pixel;
  return map;
}

/// Complement plate: clear pixels become opaque and vice versa (t -> 1-t);
/// phases are kept.
inline ObjectMap invert(const ObjectMap& map) {
  ObjectMap out = map;
  for (auto& p : out.pixels.data()) p.amplitude = 1.0 - p.amplitude;
  return out;
}

enum class Glyph { N, J, U };

inline Glyph parse_glyph(char c) {
  switch (c) {
    case 'N': case 'n': return Glyph::N;
    case 'J': case 'j': return Glyph::J;
    case 'U': case 'u': return Glyph::U;
  }
  throw ConfigError(std::string("unknown glyph '") + c + "'");
}

/// Block-letter bitmap of one glyph drawn into a w x h box; 1 marks the
/// character stroke. Strokes scale with the box so any canvas works.
inline Grid<std::uint8_t> glyph_bitmap(Glyph glyph, int width, int height) {
  Grid<std::uint8_t> bm(width, height, 0);
  const int stroke = std::max(1, std::min(width, height) / 5);
  const auto fill_rect = [&](int x0, int y0, int x1, int y1) {
    x0 = std::clamp(x0, 0, width);
    x1 = std::clamp(x1, 0, width);
    y0 = std::clamp(y0, 0, height);
    y1 = std::clamp(y1, 0, height);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) bm(x, y) = 1;
  };

  switch (glyph) {
    case Glyph::N: {
      fill_rect(0, 0, stroke, height);
      fill_rect(width - stroke, 0, width, height);
      // diagonal from top-left to bottom-right, one stroke wide
      for (int y = 0; y < height; ++y) {
        const double f = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
        const int cx = static_cast<int>(std::lround(f * (width - stroke)));
        fill_rect(cx, y, cx + stroke, y + 1);
      }
      break;
    }
    case Glyph::J: {
      fill_rect(0, 0, width, stroke);
      const int mid = (width - stroke) / 2 + stroke / 2;
      fill_rect(mid, 0, mid + stroke, height - stroke);
      fill_rect(0, height - stroke, mid + stroke, height);
      fill_rect(0, height - 3 * stroke, stroke, height);
      break;
    }
    case Glyph::U: {
      fill_rect(0, 0, stroke, height - stroke);
      fill_rect(width - stroke, 0, width, height - stroke);
      fill_rect(0, height - stroke, width, height);
      break;
    }
  }
  return bm;
}

/// Places a stroke bitmap at (x0, y0) of an otherwise opaque plate; stroke
/// pixels are clear.
inline void stamp_bitmap(ObjectMap& map, const Grid<std::uint8_t>& bitmap, int x0, int y0,
                         const PixelTransmission& stroke_value = core::clear_pixel) {
  if (x0 < 0 || y0 < 0 || x0 + bitmap.width() > map.width() ||
      y0 + bitmap.height() > map.height())
    throw ConfigError("glyph bitmap does not fit the canvas");
  for (int y = 0; y < bitmap.height(); ++y)
    for (int x = 0; x < bitmap.width(); ++x)
      if (bitmap(x, y)) map.pixels(x0 + x, y0 + y) = stroke_value;
}

/// Opaque square plate with one clear glyph, margins of 1/8 canvas.
inline ObjectMap make_glyph_plate(Glyph glyph, int canvas, double pixel_pitch_um = 13.0) {
  if (canvas < 2) throw ConfigError("glyph canvas too small");
  ObjectMap map;
  map.pixel_pitch_um = pixel_pitch_um;
  map.pixels = Grid<PixelTransmission>(canvas, canvas, core::opaque_pixel);
  const int margin = canvas / 8;
  const int box = canvas - 2 * margin;
  stamp_bitmap(map, glyph_bitmap(glyph, box, box), margin, margin);
  return map;
}

/// Opaque plate with a user bitmap centered on the canvas.
inline ObjectMap make_glyph_plate(const Grid<std::uint8_t>& bitmap, int canvas_w, int canvas_h,
                                  double pixel_pitch_um = 13.0) {
  if (bitmap.width() > canvas_w || bitmap.height() > canvas_h)
    throw ConfigError("glyph bitmap larger than canvas");
  ObjectMap map;
  map.pixel_pitch_um = pixel_pitch_um;
  map.pixels = Grid<PixelTransmission>(canvas_w, canvas_h, core::opaque_pixel);
  stamp_bitmap(map, bitmap, (canvas_w - bitmap.width()) / 2, (canvas_h - bitmap.height()) / 2);
  return map;
}

/// Opaque plate with several glyphs side by side, each assigned its own
/// transmission value. Used both for multi-character plates and for
/// phase-structured transparencies.
struct GlyphRegion {
  Glyph glyph;
  PixelTransmission value = core::clear_pixel;
};

inline ObjectMap make_text_plate(std::span<const GlyphRegion> regions, int canvas_w, int canvas_h,
                                 double pixel_pitch_um = 13.0) {
  if (regions.empty()) throw ConfigError("text plate needs at least one glyph");
  ObjectMap map;
  map.pixel_pitch_um = pixel_pitch_um;
  map.pixels = Grid<PixelTransmission>(canvas_w, canvas_h, core::opaque_pixel);
  const int n = static_cast<int>(regions.size());
  const int cell_w = canvas_w / n;
  const int margin = std::min(cell_w, canvas_h) / 8;
  const int box_w = cell_w - 2 * margin;
  const int box_h = canvas_h - 2 * margin;
  if (box_w < 1 || box_h < 1) throw ConfigError("text plate canvas too small for glyph count");
  for (int i = 0; i < n; ++i) {
    const auto bm = glyph_bitmap(regions[i].glyph, box_w, box_h);
    stamp_bitmap(map, bm, i * cell_w + margin, margin, regions[i].value);
  }
  return map;
}

/// Fraction of plate pixels that are clear (t > 0.5).
inline double clear_fraction(const ObjectMap& map) {
  std::size_t clear = 0;
  for (const auto& p : map.pixels.data())
    if (p.amplitude > 0.5) ++clear;
  return static_cast<double>(clear) / map.pixels.size();
}

inline EmissionMap uniform_emission(int width, int height, double rate) {
  if (rate < 0.0) throw ConfigError("uniform_emission: rate must be >= 0");
  EmissionMap map;
  map.rates = Grid<double>(width, height, rate);
  return map;
}

/// Gaussian pump profile: peak_rate * exp(-2 r^2 / waist^2) about the grid
/// center, with the waist given in pixels.
inline EmissionMap gaussian_emission(int width, int height, double peak_rate, double waist_px) {
  if (peak_rate < 0.0) throw ConfigError("gaussian_emission: rate must be >= 0");
  if (waist_px <= 0.0) throw ConfigError("gaussian_emission: waist must be > 0");
  EmissionMap map;
  map.rates = Grid<double>(width, height, 0.0);
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      map.rates(x, y) = peak_rate * std::exp(-2.0 * r2 / (waist_px * waist_px));
    }
  return map;
}

}  // namespace icsim::scene
