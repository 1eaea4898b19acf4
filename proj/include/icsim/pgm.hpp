#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "icsim/errors.hpp"

namespace icsim {

/// Grayscale raster in netpbm PGM form. Supports P2 (ASCII) and P5 (binary)
/// at 8 or 16 bits per sample; 16-bit P5 samples are big-endian.
struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> pixels;  // row-major, top row first

  std::uint16_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

namespace detail {

// Reads the next whitespace-delimited token, skipping '#' comments.
inline std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#')
        tok.push_back(static_cast<char>(in.get()));
      return tok;
    }
  }
  throw IoError("pgm: unexpected end of header");
}

inline int pgm_int(std::istream& in) {
  const std::string tok = pgm_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError("pgm: expected integer, got '" + tok + "'");
  }
}

}  // namespace detail

inline PgmImage read_pgm(std::istream& in) {
  const std::string magic = detail::pgm_token(in);
  if (magic != "P2" && magic != "P5") throw IoError("pgm: unsupported magic '" + magic + "'");

  PgmImage img;
  img.width = detail::pgm_int(in);
  img.height = detail::pgm_int(in);
  img.maxval = detail::pgm_int(in);
  if (img.width < 1 || img.height < 1) throw IoError("pgm: non-positive dimensions");
  if (img.maxval < 1 || img.maxval > 65535) throw IoError("pgm: maxval out of range");

  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(n);

  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) {
      const int v = detail::pgm_int(in);
      if (v < 0 || v > img.maxval) throw IoError("pgm: sample exceeds maxval");
      img.pixels[i] = static_cast<std::uint16_t>(v);
    }
  } else {
    // Exactly one whitespace byte separates the header from binary samples.
    const int sep = in.get();
    if (sep == EOF || !std::isspace(sep)) throw IoError("pgm: missing header terminator");
    const bool wide = img.maxval > 255;
    for (std::size_t i = 0; i < n; ++i) {
      int hi = in.get();
      if (hi == EOF) throw IoError("pgm: truncated pixel data");
      int v = hi;
      if (wide) {
        int lo = in.get();
        if (lo == EOF) throw IoError("pgm: truncated pixel data");
        v = (hi << 8) | lo;
      }
      if (v > img.maxval) throw IoError("pgm: sample exceeds maxval");
      img.pixels[i] = static_cast<std::uint16_t>(v);
    }
  }
  return img;
}

inline PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("pgm: cannot open '" + path.string() + "'");
  return read_pgm(in);
}

inline void write_pgm(std::ostream& out, const PgmImage& img) {
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
    throw IoError("pgm: pixel buffer does not match dimensions");
  out << "P5\n" << img.width << " " << img.height << "\n" << img.maxval << "\n";
  const bool wide = img.maxval > 255;
  for (std::uint16_t v : img.pixels) {
    if (wide) out.put(static_cast<char>((v >> 8) & 0xff));
    out.put(static_cast<char>(v & 0xff));
  }
}

inline void write_pgm(const std::filesystem::path& path, const PgmImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("pgm: cannot open '" + path.string() + "' for writing");
  write_pgm(out, img);
  if (!out) throw IoError("pgm: write failed for '" + path.string() + "'");
}

}  // namespace icsim
