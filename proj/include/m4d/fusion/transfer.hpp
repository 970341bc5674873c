// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Voxel masklets -> per-frame LiDAR point masklets, and masklet scoring.

#ifndef M4D_FUSION_TRANSFER_HPP
#define M4D_FUSION_TRANSFER_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "m4d/fusion/dbscan.hpp"
#include "m4d/fusion/masklet.hpp"
#include "m4d/recon/scene.hpp"

namespace m4d::fusion {

using geometry::Pose;

/**
 * Assigns each point of one ego-frame scan to the masklet owning the nearest
 * voxel center within `radius` (ties: lower masklet id). Foreground voxel
 * centers are placed with the box pose of `frame`. Returns, per masklet,
 * the sorted point indices.
 */
inline std::vector<std::vector<std::uint32_t>> transfer_to_points(std::span<const VoxelMasklet> masklets,
                                                                  const recon::Reconstruction& recon,
                                                                  std::span<const Vec3> scan, const Pose& ego_pose,
                                                                  int frame, double radius) {
  if (!(radius > 0.0)) throw InvalidInput("transfer_to_points: radius must be positive");
  struct Center {
    Vec3 p;
    std::size_t masklet;
  };
  struct Cell3 {
    std::int64_t x, y, z;
    bool operator==(const Cell3&) const = default;
  };
  struct Cell3Hash {
    std::size_t operator()(const Cell3& c) const noexcept {
      std::size_t h = m4d::detail::hash_mix(0, static_cast<std::uint64_t>(c.x));
      h = m4d::detail::hash_mix(h, static_cast<std::uint64_t>(c.y));
      return m4d::detail::hash_mix(h, static_cast<std::uint64_t>(c.z));
    }
  };
  auto cell_of = [radius](const Vec3& p) {
    return Cell3{static_cast<std::int64_t>(std::floor(p.x() / radius)),
                 static_cast<std::int64_t>(std::floor(p.y() / radius)),
                 static_cast<std::int64_t>(std::floor(p.z() / radius))};
  };

  std::unordered_map<Cell3, std::vector<Center>, Cell3Hash> index;
  for (std::size_t m = 0; m < masklets.size(); ++m) {
    for (const auto& [v, c] : masklets[m].voxels) {
      if (!v.grid.is_background()) {
        const auto& box = recon.boxes.at(v.grid.object_id);
        if (!box.present(frame)) continue;
      }
      const Vec3 p = recon.world_center(v, frame);
      index[cell_of(p)].push_back({p, m});
    }
  }

  std::vector<std::vector<std::uint32_t>> out(masklets.size());
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const Vec3 p = ego_pose.apply(scan[i]);
    const Cell3 c = cell_of(p);
    double best_d2 = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best;
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = index.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == index.end()) continue;
          for (const auto& center : it->second) {
            const double d2 = (center.p - p).squaredNorm();
            if (d2 > r2) continue;
            if (d2 < best_d2 || (d2 == best_d2 && masklets[center.masklet].id < masklets[*best].id)) {
              best_d2 = d2;
              best = center.masklet;
            }
          }
        }
    if (best) out[*best].push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

/// One image's contribution to a masklet score.
struct ImageEvidence {
  std::set<VoxelId> projected;  // voxels mapped by this image's mask
  std::set<VoxelId> visible;    // voxels hit by any ray of this image
};

struct MaskletScore {
  std::optional<double> score;  // empty: never visible
  std::size_t images = 0;
};

/**
 * Mean over images where the masklet is visible of
 * IoU(projected, masklet voxels intersected with visible).
 */
inline MaskletScore score_masklet(const VoxelMasklet& vm, std::span<const ImageEvidence> images) {
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& img : images) {
    std::set<VoxelId> seen;
    for (const auto& [v, c] : vm.voxels)
      if (img.visible.count(v)) seen.insert(v);
    if (seen.empty()) continue;
    std::size_t inter = 0;
    for (const auto& v : img.projected)
      if (seen.count(v)) ++inter;
    const std::size_t uni = seen.size() + img.projected.size() - inter;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++used;
  }
  MaskletScore out;
  out.images = used;
  if (used > 0) out.score = sum / static_cast<double>(used);
  return out;
}

}  // namespace m4d::fusion

#endif  // M4D_FUSION_TRANSFER_HPP
