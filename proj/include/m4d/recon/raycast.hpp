// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Exhaustive per-pixel ray casting into the 4D reconstruction.
// Each grid is traversed with Amanatides-Woo integer stepping in its own
// frame; the nearest occupied voxel across all grids wins.

#ifndef M4D_RECON_RAYCAST_HPP
#define M4D_RECON_RAYCAST_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "m4d/core/types.hpp"
#include "m4d/geometry/camera.hpp"
#include "m4d/geometry/pose.hpp"
#include "m4d/recon/scene.hpp"
#include "m4d/recon/voxel_grid.hpp"

namespace m4d::recon {

using geometry::CameraIntrinsics;

struct PixelHit {
  VoxelId voxel;
  double distance = 0.0;  // ray entry distance into the hit voxel, meters

  friend bool operator==(const PixelHit&, const PixelHit&) = default;
};

/// Pixel-voxel mapping for one (camera, frame), row-major over pixels.
struct TableSlice {
  int camera = 0;
  int frame = 0;
  int width = 0;
  int height = 0;
  std::vector<std::optional<PixelHit>> hits;

  [[nodiscard]] const std::optional<PixelHit>& at(int u, int v) const {
    return hits[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)];
  }
  [[nodiscard]] std::size_t hit_count() const {
    return static_cast<std::size_t>(std::count_if(hits.begin(), hits.end(), [](const auto& h) { return h.has_value(); }));
  }
  friend bool operator==(const TableSlice&, const TableSlice&) = default;
};

/// Slices keyed by (camera, frame).
using PixelVoxelTable = std::map<std::pair<int, int>, TableSlice>;

/// One grid placed in the world for a particular frame.
struct PlacedGrid {
  const SparseVoxelGrid* grid = nullptr;
  Pose grid_to_world;
};

/// Grids to cast against at one frame: background first, then objects.
struct RaycastScene {
  std::vector<PlacedGrid> grids;

  /// Places every object grid by its box pose at `frame`. A grid without a
  /// pose for the frame is an error unless `skip_absent` is set, in which case
  /// the object is treated as not present in that frame.
  static RaycastScene at_frame(const Reconstruction& recon, int frame, bool skip_absent = false) {
    RaycastScene scene;
    scene.grids.push_back({&recon.background, Pose::identity()});
    for (const auto& [id, grid] : recon.objects) {
      const auto it = recon.boxes.find(id);
      if (it == recon.boxes.end()) {
        throw InvalidInput("raycast: object grid " + std::to_string(id) + " has no box poses");
      }
      if (!it->second.present(frame)) {
        if (skip_absent) continue;
        throw InvalidInput("raycast: object " + std::to_string(id) + " has no box pose for frame " +
                           std::to_string(frame));
      }
      scene.grids.push_back({&grid, it->second.pose_at(frame)});
    }
    return scene;
  }
};

struct GridHit {
  VoxelKey key;
  double distance = 0.0;
};

/**
 * First occupied voxel along origin + t * dir (|dir| = 1) with entry distance
 * in (0, max_range]. A voxel that contains the origin is skipped.
 */
inline std::optional<GridHit> traverse_grid(const SparseVoxelGrid& grid, const Vec3& origin, const Vec3& dir,
                                            double max_range) {
  if (grid.empty()) return std::nullopt;
  const double s = grid.voxel_size();
  const auto [lo, hi] = grid.key_bounds();
  const Vec3 box_lo(lo.x * s, lo.y * s, lo.z * s);
  const Vec3 box_hi((hi.x + 1) * s, (hi.y + 1) * s, (hi.z + 1) * s);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  double t_enter = 0.0;
  double t_exit = max_range;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box_lo[a] || origin[a] > box_hi[a]) return std::nullopt;
      continue;
    }
    double t0 = (box_lo[a] - origin[a]) / dir[a];
    double t1 = (box_hi[a] - origin[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit) return std::nullopt;

  const Vec3 start = origin + dir * t_enter;
  const int lo_arr[3] = {lo.x, lo.y, lo.z};
  const int hi_arr[3] = {hi.x, hi.y, hi.z};
  int cell[3];
  int step[3];
  double t_max[3];
  double t_delta[3];
  for (int a = 0; a < 3; ++a) {
    cell[a] = std::clamp(static_cast<int>(std::floor(start[a] / s)), lo_arr[a], hi_arr[a]);
    if (dir[a] > 0.0) {
      step[a] = 1;
      t_max[a] = ((cell[a] + 1) * s - origin[a]) / dir[a];
      t_delta[a] = s / dir[a];
    } else if (dir[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (cell[a] * s - origin[a]) / dir[a];
      t_delta[a] = -s / dir[a];
    } else {
      step[a] = 0;
      t_max[a] = kInf;
      t_delta[a] = kInf;
    }
  }

  double t_cell = t_enter;
  for (;;) {
    const VoxelKey key{cell[0], cell[1], cell[2]};
    if (t_cell > 0.0 && grid.occupied(key)) return GridHit{key, t_cell};
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    t_cell = t_max[axis];
    if (t_cell > t_exit) return std::nullopt;
    cell[axis] += step[axis];
    if (cell[axis] < lo_arr[axis] || cell[axis] > hi_arr[axis]) return std::nullopt;
    t_max[axis] += t_delta[axis];
  }
}

/// Nearest hit across all placed grids. Equal distances (within 1e-9 m)
/// favour foreground grids, then the lowest object id.
inline std::optional<PixelHit> cast_ray(const RaycastScene& scene, const Vec3& origin_world, const Vec3& dir_world,
                                        double max_range) {
  constexpr double kTie = 1e-9;
  std::optional<PixelHit> best;
  for (const auto& placed : scene.grids) {
    const Pose to_grid = placed.grid_to_world.inverse();
    const auto hit = traverse_grid(*placed.grid, to_grid.apply(origin_world), to_grid.rotate(dir_world), max_range);
    if (!hit) continue;
    const PixelHit candidate{{placed.grid->tag(), hit->key}, hit->distance};
    if (!best) {
      best = candidate;
      continue;
    }
    const double diff = candidate.distance - best->distance;
    if (diff < -kTie) {
      best = candidate;
    } else if (std::abs(diff) <= kTie) {
      const auto& a = candidate.voxel.grid;
      const auto& b = best->voxel.grid;
      const bool better = (b.is_background() && !a.is_background()) ||
                          (!a.is_background() && !b.is_background() && a.object_id < b.object_id);
      if (better) best = candidate;
    }
  }
  return best;
}

/// World-frame unit ray direction through pixel (u, v).
inline Vec3 pixel_ray(const CameraIntrinsics& k, const Pose& cam_to_world, double u, double v) {
  return cam_to_world.rotate(k.unproject(u, v).normalized());
}

/**
 * Casts one ray per pixel of a camera with world pose `cam_to_world`.
 * Pixels whose nearest hit lies beyond max_range get no entry.
 */
inline TableSlice raycast_table(const RaycastScene& scene, const Pose& cam_to_world, const CameraIntrinsics& k,
                                int camera, int frame, double max_range) {
  k.validate();
  if (!(max_range > 0.0)) throw InvalidInput("raycast_table: max_range must be positive");
  TableSlice slice;
  slice.camera = camera;
  slice.frame = frame;
  slice.width = k.width;
  slice.height = k.height;
  slice.hits.resize(static_cast<std::size_t>(k.width) * static_cast<std::size_t>(k.height));
  const Vec3 origin = cam_to_world.translation();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      slice.hits[static_cast<std::size_t>(v) * static_cast<std::size_t>(k.width) + static_cast<std::size_t>(u)] =
          cast_ray(scene, origin, pixel_ray(k, cam_to_world, u, v), max_range);
    }
  }
  return slice;
}

inline TableSlice raycast_table(const Reconstruction& recon, const Pose& cam_to_world, const CameraIntrinsics& k,
                                int camera, int frame, double max_range, bool skip_absent = false) {
  return raycast_table(RaycastScene::at_frame(recon, frame, skip_absent), cam_to_world, k, camera, frame, max_range);
}

}  // namespace m4d::recon

#endif  // M4D_RECON_RAYCAST_HPP
