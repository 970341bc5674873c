// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Full masklet fusion: project, denoise, merge across cameras, transfer to
// LiDAR points, score.

#ifndef M4D_FUSION_FUSE_HPP
#define M4D_FUSION_FUSE_HPP

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "m4d/fusion/dbscan.hpp"
#include "m4d/fusion/masklet.hpp"
#include "m4d/fusion/merge.hpp"
#include "m4d/fusion/project.hpp"
#include "m4d/fusion/transfer.hpp"
#include "m4d/recon/raycast.hpp"
#include "m4d/recon/scene.hpp"

namespace m4d::fusion {

struct ParamBound {
  const char* name;
  double lo;
  double hi;
  bool lo_inclusive;
};

struct FusionParams {
  double eps = 0.5;
  int min_pts = 5;
  double vote_threshold = 0.0;
  double overlap_threshold = 0.5;
  double transfer_radius = 0.15;

  static constexpr ParamBound kBounds[] = {
      {"eps", 0.0, 100.0, false},
      {"min_pts", 1.0, 100000.0, true},
      {"vote_threshold", 0.0, 1.0, true},
      {"overlap_threshold", 0.0, 1.0, false},
      {"transfer_radius", 0.0, 10.0, false},
  };

  [[nodiscard]] double get(std::string_view name) const {
    if (name == "eps") return eps;
    if (name == "min_pts") return min_pts;
    if (name == "vote_threshold") return vote_threshold;
    if (name == "overlap_threshold") return overlap_threshold;
    return transfer_radius;
  }

  /// Empty when valid; otherwise one message per violated bound.
  [[nodiscard]] std::vector<std::string> violations() const {
    std::vector<std::string> out;
    for (const auto& b : kBounds) {
      const double v = get(b.name);
      const bool lo_ok = b.lo_inclusive ? v >= b.lo : v > b.lo;
      if (!lo_ok || !(v <= b.hi)) {
        out.push_back(std::string(b.name) + " must be in " + (b.lo_inclusive ? "[" : "(") + std::to_string(b.lo) +
                      ", " + std::to_string(b.hi) + "], got " + std::to_string(v));
      }
    }
    return out;
  }

  void validate() const {
    const auto v = violations();
    if (!v.empty()) throw InvalidInput("FusionParams: " + v.front());
  }

  friend bool operator==(const FusionParams&, const FusionParams&) = default;
};

/// One LiDAR sweep in ego coordinates and the ego pose at capture.
struct FrameScan {
  geometry::Pose ego_pose;
  std::vector<Vec3> points;
};

struct SourceMasklet {
  VoxelMasklet raw;       // all observed voxels with vote counts
  VoxelMasklet filtered;  // main BEV cluster only
  bool all_noise = false;
};

struct FusedMasklet {
  VoxelMasklet voxels;
  Masklet3D points;
  MaskletScore score;
  std::vector<std::int64_t> sources;
};

struct FusionResult {
  std::map<std::int64_t, SourceMasklet> sources;
  std::vector<FusedMasklet> masklets;  // sorted by id
  std::map<std::int64_t, std::int64_t> id_map;
};

/// `scans` is indexed by frame.
inline FusionResult fuse(const recon::Reconstruction& recon, const recon::PixelVoxelTable& table,
                         std::span<const Masklet2D> masklets, std::span<const FrameScan> scans,
                         const FusionParams& params) {
  params.validate();
  FusionResult result;
  std::vector<VoxelMasklet> filtered;
  std::map<std::int64_t, const Masklet2D*> by_id;
  for (const auto& m : masklets) {
    if (!by_id.emplace(m.id, &m).second) throw InvalidInput("fuse: duplicate masklet id " + std::to_string(m.id));
    SourceMasklet src;
    src.raw = project_masklet(m, table);
    const VoxelMasklet candidates = voted_voxels(src.raw, params.vote_threshold);
    const auto labels = dbscan_bev(candidates, recon, params.eps, params.min_pts);
    auto sel = select_main_cluster(candidates, labels);
    src.filtered = std::move(sel.masklet);
    src.all_noise = sel.all_noise;
    if (!src.all_noise) filtered.push_back(src.filtered);
    result.sources.emplace(m.id, std::move(src));
  }

  auto merged = merge_cross_video(filtered, params.overlap_threshold);
  result.id_map = merged.id_map;

  std::map<std::pair<int, int>, std::set<VoxelId>> visible_cache;
  auto visible_of = [&](const recon::TableSlice& s) -> const std::set<VoxelId>& {
    auto it = visible_cache.find({s.camera, s.frame});
    if (it == visible_cache.end()) it = visible_cache.emplace(std::pair{s.camera, s.frame}, visible_voxels(s)).first;
    return it->second;
  };

  for (auto& vm : merged.masklets) {
    FusedMasklet fm;
    fm.points.id = vm.id;
    for (const auto& [src, dst] : merged.id_map)
      if (dst == vm.id) fm.sources.push_back(src);
    std::vector<ImageEvidence> evidence;
    for (auto src_id : fm.sources) {
      const Masklet2D& m2 = *by_id.at(src_id);
      for (auto it = table.lower_bound({m2.camera, std::numeric_limits<int>::min()});
           it != table.end() && it->first.first == m2.camera; ++it) {
        ImageEvidence ev;
        ev.visible = visible_of(it->second);
        if (m2.frames.count(it->second.frame)) ev.projected = image_projection(m2.mask(it->second.frame), it->second);
        evidence.push_back(std::move(ev));
      }
    }
    fm.score = score_masklet(vm, evidence);
    fm.voxels = std::move(vm);
    result.masklets.push_back(std::move(fm));
  }

  std::vector<VoxelMasklet> final_voxels;
  for (const auto& fm : result.masklets) final_voxels.push_back(fm.voxels);
  for (std::size_t f = 0; f < scans.size(); ++f) {
    const auto assigned = transfer_to_points(final_voxels, recon, scans[f].points, scans[f].ego_pose,
                                             static_cast<int>(f), params.transfer_radius);
    for (std::size_t m = 0; m < assigned.size(); ++m)
      if (!assigned[m].empty()) result.masklets[m].points.frames[static_cast<int>(f)] = assigned[m];
  }
  return result;
}

}  // namespace m4d::fusion

#endif  // M4D_FUSION_FUSE_HPP
