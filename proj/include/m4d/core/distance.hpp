// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Exact squared Euclidean distance transform on a pixel grid
// (separable lower-envelope method of Felzenszwalb and Huttenlocher).

#ifndef M4D_CORE_DISTANCE_HPP
#define M4D_CORE_DISTANCE_HPP

#include <algorithm>
#include <limits>
#include <vector>

#include "m4d/core/mask.hpp"

namespace m4d {

namespace detail {
// One pass of the lower envelope of parabolas rooted at finite samples of f.
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(f.size());
  auto at = [](auto& vec, int i) -> auto& { return vec[static_cast<std::size_t>(i)]; };
  auto meet = [&](int q, int p) {
    return ((at(f, q) + static_cast<double>(q) * q) - (at(f, p) + static_cast<double>(p) * p)) / (2.0 * (q - p));
  };
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (at(f, q) == kInf) continue;
    if (k < 0) {
      k = 0;
      at(v, 0) = q;
      at(z, 0) = -kInf;
      at(z, 1) = kInf;
      continue;
    }
    double s = meet(q, at(v, k));
    while (s <= at(z, k)) {
      --k;
      s = meet(q, at(v, k));
    }
    ++k;
    at(v, k) = q;
    at(z, k) = s;
    at(z, k + 1) = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) at(d, q) = kInf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (at(z, j + 1) < q) ++j;
    const int p = at(v, j);
    at(d, q) = static_cast<double>(q - p) * (q - p) + at(f, p);
  }
}
}  // namespace detail

/// Squared distance from every pixel to the nearest set pixel of `features`
/// (infinity when there are none).
inline std::vector<double> squared_distance_to(const BinaryMask& features) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int w = features.width;
  const int h = features.height;
  std::vector<double> grid(features.bits.size());
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = features.bits[i] ? 0.0 : kInf;

  const int n = std::max(w, h);
  std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n)), z(static_cast<std::size_t>(n) + 1);
  std::vector<int> v(static_cast<std::size_t>(n));
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x); };

  f.resize(static_cast<std::size_t>(h));
  d.resize(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = grid[idx(x, y)];
    detail::edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) grid[idx(x, y)] = d[static_cast<std::size_t>(y)];
  }
  f.resize(static_cast<std::size_t>(w));
  d.resize(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(x)] = grid[idx(x, y)];
    detail::edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) grid[idx(x, y)] = d[static_cast<std::size_t>(x)];
  }
  return grid;
}

}  // namespace m4d

#endif  // M4D_CORE_DISTANCE_HPP
