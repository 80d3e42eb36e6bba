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

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>

#include "fmr/fmm.hpp"
#include "fmr/grid_io.hpp"

// FMMP checkpoint layout (all integers uint32 little-endian):
//
//   "FMMP" | version | mask_mode | spatial_mode | height | width |
//   kernel_size | n_spectral | n_spatial |
//   kernel taps, spectral logits, spatial logits (float64 LE, in order)

namespace fmr::io {

inline constexpr std::uint32_t kFmmpVersion = 1;

inline void write_fmmp(std::ostream& os, const FmmParams& p) {
  p.validate();
  os.write("FMMP", 4);
  detail::put_u32_le(os, kFmmpVersion);
  detail::put_u32_le(os, static_cast<std::uint32_t>(p.mask_mode));
  detail::put_u32_le(os, static_cast<std::uint32_t>(p.spatial_mode));
  detail::put_u32_le(os, static_cast<std::uint32_t>(p.height));
  detail::put_u32_le(os, static_cast<std::uint32_t>(p.width));
  detail::put_u32_le(os, static_cast<std::uint32_t>(p.lowpass.size()));
  detail::put_u32_le(os, static_cast<std::uint32_t>(p.spectral_logits.size()));
  detail::put_u32_le(os, static_cast<std::uint32_t>(p.spatial_logits.size()));
  for (double v : p.lowpass.taps()) detail::put_f64_le(os, v);
  for (double v : p.spectral_logits) detail::put_f64_le(os, v);
  for (double v : p.spatial_logits) detail::put_f64_le(os, v);
  if (!os) throw IoError("failed writing FMMP stream");
}

inline FmmParams read_fmmp(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "FMMP") {
    throw IoError("not an FMMP stream");
  }
  const auto version = detail::get_u32_le(is);
  if (version != kFmmpVersion) {
    throw IoError(fmr::detail::concat("unsupported FMMP version ", version));
  }
  const auto mask_mode = detail::get_u32_le(is);
  const auto spatial_mode = detail::get_u32_le(is);
  if (mask_mode > 1 || spatial_mode > 1) throw IoError("bad FMMP mode tag");
  FmmParams p;
  p.mask_mode = static_cast<MaskMode>(mask_mode);
  p.spatial_mode = static_cast<SpatialMode>(spatial_mode);
  p.height = detail::get_u32_le(is);
  p.width = detail::get_u32_le(is);
  const auto ksize = detail::get_u32_le(is);
  const auto n_spectral = detail::get_u32_le(is);
  const auto n_spatial = detail::get_u32_le(is);
  // Guard against absurd counts before allocating.
  constexpr std::uint32_t kMaxCount = 1u << 26;
  if (ksize == 0 || ksize % 2 == 0 || ksize > 4096 || n_spectral > kMaxCount ||
      n_spatial > kMaxCount) {
    throw IoError("corrupt FMMP header");
  }
  p.lowpass = Kernel2D(ksize);
  for (auto& v : p.lowpass.taps()) v = detail::get_f64_le(is);
  p.spectral_logits.resize(n_spectral);
  for (auto& v : p.spectral_logits) v = detail::get_f64_le(is);
  p.spatial_logits.resize(n_spatial);
  for (auto& v : p.spatial_logits) v = detail::get_f64_le(is);
  try {
    p.validate();
  } catch (const Error& e) {
    throw IoError(std::string("inconsistent FMMP payload: ") + e.what());
  }
  return p;
}

inline void save_fmmp(const std::filesystem::path& path, const FmmParams& p) {
  auto os = detail::open_out(path);
  write_fmmp(os, p);
}

inline FmmParams load_fmmp(const std::filesystem::path& path) {
  auto is = detail::open_in(path);
  try {
    return read_fmmp(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace fmr::io
