// Copyright 2026 The fmr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "fmr/error.hpp"
#include "fmr/grid.hpp"

// Grid file formats.
//
//   FGRID: ASCII line "FGRID <height> <width>\n", then height*width
//          little-endian IEEE-754 float64 values, row-major.
//   PGM:   binary P5 with maxval <= 65535 (16-bit samples big-endian).
//          Samples are scaled to [0, 1] by maxval on read.

namespace fmr::io {

namespace detail {

inline void put_f64_le(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline double get_f64_le(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) {
    throw IoError("unexpected end of stream reading float64");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{buf[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 4);
}

inline std::uint32_t get_u32_le(std::istream& is) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4)) {
    throw IoError("unexpected end of stream reading uint32");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{buf[i]} << (8 * i);
  return v;
}

// Next whitespace-delimited token of a PNM header, skipping '#' comments.
inline std::string pnm_token(std::istream& is) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

inline std::size_t parse_dim(const std::string& tok, const char* what) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw IoError(fmr::detail::concat("bad ", what, " '", tok, "'"));
  }
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string() + " for reading");
  return is;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

}  // namespace detail

inline void write_fgrid(std::ostream& os, const FeatureGrid& g) {
  os << "FGRID " << g.height() << ' ' << g.width() << '\n';
  for (double v : g.values()) detail::put_f64_le(os, v);
  if (!os) throw IoError("failed writing FGRID stream");
}

inline FeatureGrid read_fgrid(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty FGRID stream");
  std::istringstream hdr(line);
  std::string magic, hs, ws, extra;
  hdr >> magic >> hs >> ws;
  if (magic != "FGRID" || (hdr >> extra)) {
    throw IoError("bad FGRID header '" + line + "'");
  }
  const std::size_t h = detail::parse_dim(hs, "FGRID height");
  const std::size_t w = detail::parse_dim(ws, "FGRID width");
  FeatureGrid g(h, w);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = detail::get_f64_le(is);
  return g;
}

inline void save_fgrid(const std::filesystem::path& path, const FeatureGrid& g) {
  auto os = detail::open_out(path);
  write_fgrid(os, g);
}

inline FeatureGrid load_fgrid(const std::filesystem::path& path) {
  auto is = detail::open_in(path);
  try {
    return read_fgrid(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline FeatureGrid read_pgm(std::istream& is) {
  if (detail::pnm_token(is) != "P5") throw IoError("not a binary PGM (P5)");
  const std::size_t w = detail::parse_dim(detail::pnm_token(is), "PGM width");
  const std::size_t h = detail::parse_dim(detail::pnm_token(is), "PGM height");
  const std::size_t maxval = detail::parse_dim(detail::pnm_token(is), "PGM maxval");
  if (maxval > 65535) throw IoError("PGM maxval above 65535");
  // pnm_token consumed exactly one whitespace byte after maxval.
  FeatureGrid g(h, w);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < g.size(); ++i) {
    unsigned v;
    if (maxval < 256) {
      const int c = is.get();
      if (c == EOF) throw IoError("truncated PGM data");
      v = static_cast<unsigned>(c);
    } else {
      const int hi = is.get();
      const int lo = is.get();
      if (hi == EOF || lo == EOF) throw IoError("truncated PGM data");
      v = (static_cast<unsigned>(hi) << 8) | static_cast<unsigned>(lo);
    }
    g[i] = std::min(1.0, static_cast<double>(v) * scale);
  }
  return g;
}

// Writes an 8-bit P5 image; values are clamped to [0, 1].
inline void write_pgm(std::ostream& os, const FeatureGrid& g) {
  os << "P5\n" << g.width() << ' ' << g.height() << "\n255\n";
  for (double v : g.values()) {
    const double c = std::clamp(v, 0.0, 1.0);
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  if (!os) throw IoError("failed writing PGM stream");
}

inline FeatureGrid load_pgm(const std::filesystem::path& path) {
  auto is = detail::open_in(path);
  try {
    return read_pgm(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void save_pgm(const std::filesystem::path& path, const FeatureGrid& g) {
  auto os = detail::open_out(path);
  write_pgm(os, g);
}

// Loads by extension: .pgm as PGM, anything else as FGRID.
inline FeatureGrid load_image(const std::filesystem::path& path) {
  if (path.extension() == ".pgm") return load_pgm(path);
  return load_fgrid(path);
}

}  // namespace fmr::io
