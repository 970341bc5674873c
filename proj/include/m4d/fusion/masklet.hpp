// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Masklet representations in pixel, voxel and LiDAR-point space.

#ifndef M4D_FUSION_MASKLET_HPP
#define M4D_FUSION_MASKLET_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "m4d/core/mask.hpp"
#include "m4d/core/types.hpp"
#include "m4d/io/rle.hpp"

namespace m4d::fusion {

/// One object's video track from one camera, stored run-length encoded.
struct Masklet2D {
  std::int64_t id = 0;
  std::int64_t object_id = 0;
  int camera = 0;
  int width = 0;
  int height = 0;
  std::map<int, io::RleMask> frames;

  [[nodiscard]] BinaryMask mask(int frame) const {
    const auto it = frames.find(frame);
    if (it == frames.end()) return BinaryMask(width, height);
    if (it->second.width != width || it->second.height != height) {
      throw InvalidInput("Masklet2D " + std::to_string(id) + ": frame " + std::to_string(frame) +
                         " has mismatched dimensions");
    }
    return io::rle_decode(it->second);
  }

  void set_mask(int frame, const BinaryMask& m) {
    if (m.width != width || m.height != height) throw InvalidInput("Masklet2D: mask dimensions mismatch");
    frames[frame] = io::rle_encode(m);
  }
};

struct VoteCount {
  std::uint32_t votes = 0;
  std::uint32_t observations = 0;

  [[nodiscard]] double rate() const {
    return observations == 0 ? 0.0 : static_cast<double>(votes) / static_cast<double>(observations);
  }
  friend bool operator==(const VoteCount&, const VoteCount&) = default;
};

struct VoxelMasklet {
  std::int64_t id = 0;
  std::set<int> cameras;
  std::map<VoxelId, VoteCount> voxels;

  [[nodiscard]] std::set<VoxelId> voxel_set() const {
    std::set<VoxelId> out;
    for (const auto& [v, c] : voxels) out.insert(v);
    return out;
  }
  [[nodiscard]] double mean_rate() const {
    if (voxels.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [v, c] : voxels) s += c.rate();
    return s / static_cast<double>(voxels.size());
  }
  friend bool operator==(const VoxelMasklet&, const VoxelMasklet&) = default;
};

/// Per-frame sorted LiDAR point indices.
struct Masklet3D {
  std::int64_t id = 0;
  std::map<int, std::vector<std::uint32_t>> frames;

  friend bool operator==(const Masklet3D&, const Masklet3D&) = default;
};

}  // namespace m4d::fusion

#endif  // M4D_FUSION_MASKLET_HPP
