// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Run-length mask codec. Runs alternate off/on starting with an off-run
// (possibly zero), scanning the mask row-major.

#ifndef M4D_IO_RLE_HPP
#define M4D_IO_RLE_HPP

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "m4d/core/mask.hpp"

namespace m4d::io {

struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> runs;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

inline RleMask rle_encode(const BinaryMask& mask) {
  RleMask out{mask.width, mask.height, {}};
  bool state = false;
  std::uint32_t run = 0;
  for (auto b : mask.bits) {
    const bool on = b != 0;
    if (on != state) {
      out.runs.push_back(run);
      run = 0;
      state = on;
    }
    ++run;
  }
  out.runs.push_back(run);
  return out;
}

inline BinaryMask rle_decode(const RleMask& rle) {
  if (rle.width < 0 || rle.height < 0) throw InvalidInput("rle_decode: negative dimensions");
  const std::uint64_t expected = static_cast<std::uint64_t>(rle.width) * static_cast<std::uint64_t>(rle.height);
  const std::uint64_t actual = std::accumulate(rle.runs.begin(), rle.runs.end(), std::uint64_t{0});
  if (actual != expected) {
    throw InvalidInput("rle_decode: runs sum to " + std::to_string(actual) + " but mask has " +
                       std::to_string(expected) + " pixels");
  }
  BinaryMask mask(rle.width, rle.height);
  std::size_t at = 0;
  bool on = false;
  for (auto run : rle.runs) {
    if (on) std::fill_n(mask.bits.begin() + static_cast<std::ptrdiff_t>(at), run, std::uint8_t{1});
    at += run;
    on = !on;
  }
  return mask;
}

}  // namespace m4d::io

#endif  // M4D_IO_RLE_HPP
