// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Hash-addressed sparse occupancy volume.

#ifndef M4D_RECON_VOXEL_GRID_HPP
#define M4D_RECON_VOXEL_GRID_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "m4d/core/types.hpp"

namespace m4d::recon {

inline constexpr double kDefaultVoxelSize = 0.1;

/// Occupancy weight = number of integrated points that fell in the voxel.
class SparseVoxelGrid {
 public:
  using Weight = std::uint32_t;

  explicit SparseVoxelGrid(double voxel_size = kDefaultVoxelSize, GridTag tag = GridTag::background())
      : voxel_size_(voxel_size), tag_(tag) {
    if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
      throw InvalidInput("SparseVoxelGrid: voxel size must be positive");
    }
  }

  [[nodiscard]] double voxel_size() const { return voxel_size_; }
  [[nodiscard]] GridTag tag() const { return tag_; }
  [[nodiscard]] std::size_t size() const { return cells_.size(); }
  [[nodiscard]] bool empty() const { return cells_.empty(); }

  [[nodiscard]] VoxelKey key_of(const Vec3& p) const {
    return {static_cast<std::int32_t>(std::floor(p.x() / voxel_size_)),
            static_cast<std::int32_t>(std::floor(p.y() / voxel_size_)),
            static_cast<std::int32_t>(std::floor(p.z() / voxel_size_))};
  }

  [[nodiscard]] Vec3 center(const VoxelKey& k) const {
    return {(k.x + 0.5) * voxel_size_, (k.y + 0.5) * voxel_size_, (k.z + 0.5) * voxel_size_};
  }

  [[nodiscard]] bool occupied(const VoxelKey& k) const { return cells_.find(k) != cells_.end(); }

  [[nodiscard]] Weight weight(const VoxelKey& k) const {
    const auto it = cells_.find(k);
    return it == cells_.end() ? 0 : it->second;
  }

  /// Rejects the whole batch, leaving the grid untouched, if any point is
  /// non-finite.
  void integrate(std::span<const Vec3> points) {
    for (const auto& p : points) {
      if (!p.allFinite()) throw InvalidInput("integrate_scan: non-finite point");
    }
    for (const auto& p : points) add(key_of(p), 1);
  }

  /// Adds `w` hits to a voxel. Used by deserialization and tests.
  void add(const VoxelKey& k, Weight w) {
    if (w == 0) return;
    auto [it, inserted] = cells_.try_emplace(k, 0);
    it->second += w;
    if (inserted) {
      if (cells_.size() == 1) {
        lo_ = hi_ = k;
      } else {
        lo_ = {std::min(lo_.x, k.x), std::min(lo_.y, k.y), std::min(lo_.z, k.z)};
        hi_ = {std::max(hi_.x, k.x), std::max(hi_.y, k.y), std::max(hi_.z, k.z)};
      }
    }
  }

  /// Inclusive key bounds; meaningless when empty.
  [[nodiscard]] std::pair<VoxelKey, VoxelKey> key_bounds() const { return {lo_, hi_}; }

  /// (key, weight) pairs in lexicographic key order.
  [[nodiscard]] std::vector<std::pair<VoxelKey, Weight>> sorted_records() const {
    std::vector<std::pair<VoxelKey, Weight>> out(cells_.begin(), cells_.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
  }

  [[nodiscard]] const std::unordered_map<VoxelKey, Weight, VoxelKeyHash>& cells() const { return cells_; }

  friend bool operator==(const SparseVoxelGrid& a, const SparseVoxelGrid& b) {
    return a.voxel_size_ == b.voxel_size_ && a.tag_ == b.tag_ && a.cells_ == b.cells_;
  }

 private:
  double voxel_size_;
  GridTag tag_;
  std::unordered_map<VoxelKey, Weight, VoxelKeyHash> cells_;
  VoxelKey lo_{}, hi_{};
};

inline SparseVoxelGrid& integrate_scan(SparseVoxelGrid& grid, std::span<const Vec3> points) {
  grid.integrate(points);
  return grid;
}

}  // namespace m4d::recon

#endif  // M4D_RECON_VOXEL_GRID_HPP
