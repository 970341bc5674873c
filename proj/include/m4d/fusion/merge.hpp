// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Cross-video merging of voxel masklets by voxel-set overlap.

#ifndef M4D_FUSION_MERGE_HPP
#define M4D_FUSION_MERGE_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "m4d/fusion/dbscan.hpp"
#include "m4d/fusion/masklet.hpp"

namespace m4d::fusion {

inline double voxel_iou(const VoxelMasklet& a, const VoxelMasklet& b) {
  if (a.voxels.empty() && b.voxels.empty()) return 1.0;
  std::size_t inter = 0;
  auto ia = a.voxels.begin();
  auto ib = b.voxels.begin();
  while (ia != a.voxels.end() && ib != b.voxels.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.voxels.size() + b.voxels.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {
inline bool disjoint(const std::set<int>& a, const std::set<int>& b) {
  for (int x : a)
    if (b.count(x)) return false;
  return true;
}
}  // namespace detail

struct MergeResult {
  std::vector<VoxelMasklet> masklets;            // sorted by id
  std::map<std::int64_t, std::int64_t> id_map;   // input id -> merged id
};

/// Sums votes and observations voxel-wise. The result takes the lowest id.
inline VoxelMasklet union_masklets(std::span<const VoxelMasklet* const> parts) {
  VoxelMasklet out;
  out.id = parts.front()->id;
  for (const auto* p : parts) {
    out.id = std::min(out.id, p->id);
    out.cameras.insert(p->cameras.begin(), p->cameras.end());
    for (const auto& [v, c] : p->voxels) {
      auto& dst = out.voxels[v];
      dst.votes += c.votes;
      dst.observations += c.observations;
    }
  }
  return out;
}

/**
 * Masklets with disjoint camera sets are linked when their voxel IoU reaches
 * `overlap_threshold`; each connected component becomes one masklet. The
 * pass repeats on its own output until nothing links, so the result is a
 * fixed point of merging.
 */
inline MergeResult merge_cross_video(std::span<const VoxelMasklet> input, double overlap_threshold) {
  MergeResult result;
  std::vector<VoxelMasklet> current(input.begin(), input.end());
  std::sort(current.begin(), current.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& m : current) result.id_map[m.id] = m.id;

  for (;;) {
    const std::size_t n = current.size();
    detail::DisjointSet sets(n);
    bool linked = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!detail::disjoint(current[i].cameras, current[j].cameras)) continue;
        if (voxel_iou(current[i], current[j]) >= overlap_threshold) {
          sets.unite(i, j);
          linked = true;
        }
      }
    }
    if (!linked) break;

    std::map<std::size_t, std::vector<const VoxelMasklet*>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[sets.find(i)].push_back(&current[i]);
    std::vector<VoxelMasklet> next;
    std::map<std::int64_t, std::int64_t> step;
    for (const auto& [root, members] : groups) {
      next.push_back(union_masklets(members));
      for (const auto* m : members) step[m->id] = next.back().id;
    }
    for (auto& [src, dst] : result.id_map) dst = step.at(dst);
    std::sort(next.begin(), next.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    current = std::move(next);
  }
  result.masklets = std::move(current);
  return result;
}

}  // namespace m4d::fusion

#endif  // M4D_FUSION_MERGE_HPP
