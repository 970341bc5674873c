// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// 2D masklet -> voxel votes through the pixel-voxel table.

#ifndef M4D_FUSION_PROJECT_HPP
#define M4D_FUSION_PROJECT_HPP

#include <limits>
#include <set>
#include <string>

#include "m4d/core/mask.hpp"
#include "m4d/fusion/masklet.hpp"
#include "m4d/recon/raycast.hpp"

namespace m4d::fusion {

using recon::PixelVoxelTable;
using recon::TableSlice;

/// Voxels hit by at least one pixel of the slice.
inline std::set<VoxelId> visible_voxels(const TableSlice& slice) {
  std::set<VoxelId> out;
  for (const auto& h : slice.hits)
    if (h) out.insert(h->voxel);
  return out;
}

/// Voxels hit by at least one masked pixel.
inline std::set<VoxelId> image_projection(const BinaryMask& mask, const TableSlice& slice) {
  if (mask.width != slice.width || mask.height != slice.height) {
    throw InvalidInput("project_masklet: mask size differs from table slice size");
  }
  std::set<VoxelId> out;
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    if (mask.bits[i] && slice.hits[i]) out.insert(slice.hits[i]->voxel);
  return out;
}

/**
 * Every table frame of the masklet's camera is one observation opportunity:
 * a voxel hit by any ray in that frame gains one observation, and one vote
 * if at least one masked pixel maps to it. Frames the masklet lacks count as
 * empty masks.
 */
inline VoxelMasklet project_masklet(const Masklet2D& m, const PixelVoxelTable& table) {
  for (const auto& [frame, rle] : m.frames) {
    if (table.find({m.camera, frame}) == table.end()) {
      throw InvalidInput("project_masklet: no table slice for camera " + std::to_string(m.camera) + ", frame " +
                         std::to_string(frame));
    }
  }
  VoxelMasklet out;
  out.id = m.id;
  out.cameras.insert(m.camera);
  for (auto it = table.lower_bound({m.camera, std::numeric_limits<int>::min()});
       it != table.end() && it->first.first == m.camera; ++it) {
    const TableSlice& slice = it->second;
    for (const auto& v : visible_voxels(slice)) ++out.voxels[v].observations;
    if (m.frames.count(slice.frame) == 0) continue;
    for (const auto& v : image_projection(m.mask(slice.frame), slice)) ++out.voxels[v].votes;
  }
  return out;
}

/// Records with at least one vote and vote rate >= `min_rate`.
inline VoxelMasklet voted_voxels(const VoxelMasklet& vm, double min_rate = 0.0) {
  VoxelMasklet out;
  out.id = vm.id;
  out.cameras = vm.cameras;
  for (const auto& [v, c] : vm.voxels)
    if (c.votes > 0 && c.rate() >= min_rate) out.voxels.emplace(v, c);
  return out;
}

}  // namespace m4d::fusion

#endif  // M4D_FUSION_PROJECT_HPP
