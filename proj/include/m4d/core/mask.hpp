// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Dense binary mask. Image masks are width x height, row-major; LiDAR point
// masks use height 1 and one element per point.

#ifndef M4D_CORE_MASK_HPP
#define M4D_CORE_MASK_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "m4d/core/types.hpp"

namespace m4d {

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {
    if (w < 0 || h < 0) throw InvalidInput("BinaryMask: negative dimensions");
  }

  static BinaryMask points(std::size_t n) { return BinaryMask(static_cast<int>(n), 1); }

  static BinaryMask from_indices(std::size_t n, std::span<const std::uint32_t> indices) {
    BinaryMask m = points(n);
    for (auto i : indices) {
      if (i >= n) throw InvalidInput("BinaryMask: point index out of range");
      m.bits[i] = 1;
    }
    return m;
  }

  [[nodiscard]] std::size_t size() const { return bits.size(); }
  [[nodiscard]] bool get(int u, int v) const {
    return bits[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)] != 0;
  }
  void set(int u, int v, bool on = true) {
    bits[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)] = on ? 1 : 0;
  }
  [[nodiscard]] std::size_t count() const {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
  }
  [[nodiscard]] bool any() const {
    return std::any_of(bits.begin(), bits.end(), [](auto b) { return b != 0; });
  }
  [[nodiscard]] bool same_shape(const BinaryMask& o) const { return width == o.width && height == o.height; }

  [[nodiscard]] std::vector<std::uint32_t> indices() const {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) out.push_back(static_cast<std::uint32_t>(i));
    return out;
  }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.bits.size(); ++i)
      if ((a.bits[i] != 0) != (b.bits[i] != 0)) return false;
    return true;
  }
};

}  // namespace m4d

#endif  // M4D_CORE_MASK_HPP
