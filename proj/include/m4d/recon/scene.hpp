// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Foreground/background split and 4D reconstruction: one world-frame
// background grid plus one body-frame grid per boxed object.

#ifndef M4D_RECON_SCENE_HPP
#define M4D_RECON_SCENE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "m4d/core/types.hpp"
#include "m4d/geometry/pose.hpp"
#include "m4d/recon/voxel_grid.hpp"

namespace m4d::recon {

using geometry::Pose;

/// Annotated 3D box. `poses[f]` maps body coordinates to world at frame f.
struct ObjectBox {
  std::int64_t id = 0;
  Vec3 half_extents = Vec3::Ones();
  std::map<int, Pose> poses;

  [[nodiscard]] bool present(int frame) const { return poses.count(frame) != 0; }

  [[nodiscard]] const Pose& pose_at(int frame) const {
    const auto it = poses.find(frame);
    if (it == poses.end()) {
      throw InvalidInput("object " + std::to_string(id) + " has no box pose for frame " + std::to_string(frame));
    }
    return it->second;
  }

  [[nodiscard]] bool contains_body(const Vec3& p_body) const {
    return std::abs(p_body.x()) <= half_extents.x() && std::abs(p_body.y()) <= half_extents.y() &&
           std::abs(p_body.z()) <= half_extents.z();
  }
};

struct ForegroundSplit {
  std::vector<Vec3> background;                        // world frame
  std::map<std::int64_t, std::vector<Vec3>> objects;   // body frame
  std::vector<std::int64_t> owner;                     // per input point, GridTag::kBackground or object id
};

/**
 * Points inside at least one box go to the box with the nearest center
 * (ties: lowest object id), expressed in that box's body frame. Everything
 * else goes to the background in world coordinates.
 */
inline ForegroundSplit split_foreground(std::span<const Vec3> scan, const Pose& ego_pose,
                                        std::span<const ObjectBox> boxes, int frame) {
  struct Placed {
    const ObjectBox* box;
    Pose world_to_body;
    Vec3 center;
  };
  std::vector<Placed> placed;
  placed.reserve(boxes.size());
  for (const auto& b : boxes) {
    const Pose& p = b.pose_at(frame);
    placed.push_back({&b, p.inverse(), p.translation()});
  }
  std::sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) { return a.box->id < b.box->id; });

  ForegroundSplit out;
  out.owner.reserve(scan.size());
  for (const auto& b : placed) out.objects[b.box->id];
  for (const auto& p_ego : scan) {
    const Vec3 p = ego_pose.apply(p_ego);
    const Placed* best = nullptr;
    double best_d2 = std::numeric_limits<double>::infinity();
    Vec3 best_body;
    for (const auto& b : placed) {
      const Vec3 body = b.world_to_body.apply(p);
      if (!b.box->contains_body(body)) continue;
      const double d2 = (p - b.center).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = &b;
        best_body = body;
      }
    }
    if (best == nullptr) {
      out.background.push_back(p);
      out.owner.push_back(GridTag::kBackground);
    } else {
      out.objects[best->box->id].push_back(best_body);
      out.owner.push_back(best->box->id);
    }
  }
  return out;
}

/// The 4D reconstruction: background grid, body-frame object grids, boxes.
struct Reconstruction {
  double voxel_size = kDefaultVoxelSize;
  SparseVoxelGrid background{kDefaultVoxelSize, GridTag::background()};
  std::map<std::int64_t, SparseVoxelGrid> objects;
  std::map<std::int64_t, ObjectBox> boxes;

  explicit Reconstruction(double vs = kDefaultVoxelSize)
      : voxel_size(vs), background(vs, GridTag::background()) {}

  [[nodiscard]] const SparseVoxelGrid& grid(GridTag tag) const {
    if (tag.is_background()) return background;
    const auto it = objects.find(tag.object_id);
    if (it == objects.end()) throw InvalidInput("no grid for object " + std::to_string(tag.object_id));
    return it->second;
  }

  /// World position of a voxel center; foreground voxels use the box pose at `frame`.
  [[nodiscard]] Vec3 world_center(const VoxelId& v, int frame) const {
    const Vec3 c = grid(v.grid).center(v.key);
    if (v.grid.is_background()) return c;
    return boxes.at(v.grid.object_id).pose_at(frame).apply(c);
  }

  /// Frame-independent location used for BEV clustering. Foreground voxels
  /// are placed with the box pose of the object's first frame.
  [[nodiscard]] Vec3 reference_center(const VoxelId& v) const {
    const Vec3 c = grid(v.grid).center(v.key);
    if (v.grid.is_background()) return c;
    const auto& box = boxes.at(v.grid.object_id);
    if (box.poses.empty()) throw InvalidInput("object " + std::to_string(box.id) + " has no poses");
    return box.poses.begin()->second.apply(c);
  }

  /// Integrates one ego-frame scan. `boxes_here` are the boxes present at `frame`.
  void integrate_frame(std::span<const Vec3> scan, const Pose& ego_pose, std::span<const ObjectBox> boxes_here,
                       int frame) {
    const auto split = split_foreground(scan, ego_pose, boxes_here, frame);
    background.integrate(split.background);
    for (const auto& [id, pts] : split.objects) {
      auto it = objects.try_emplace(id, voxel_size, GridTag::object(id)).first;
      it->second.integrate(pts);
    }
    for (const auto& b : boxes_here) {
      auto& stored = boxes.try_emplace(b.id, b).first->second;
      stored.half_extents = b.half_extents;
      stored.poses.insert(b.poses.begin(), b.poses.end());
    }
  }
};

}  // namespace m4d::recon

#endif  // M4D_RECON_SCENE_HPP
