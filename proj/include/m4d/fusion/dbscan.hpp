// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Order-independent DBSCAN over bird's-eye-view voxel positions.

#ifndef M4D_FUSION_DBSCAN_HPP
#define M4D_FUSION_DBSCAN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "m4d/core/types.hpp"
#include "m4d/fusion/masklet.hpp"
#include "m4d/recon/scene.hpp"

namespace m4d::fusion {

inline constexpr int kNoise = -1;

namespace detail {

struct CellKey {
  std::int64_t x, y;
  bool operator==(const CellKey&) const = default;
};
struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    return m4d::detail::hash_mix(m4d::detail::hash_mix(0, static_cast<std::uint64_t>(k.x)),
                                 static_cast<std::uint64_t>(k.y));
  }
};

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

/**
 * DBSCAN with |N_eps(p)| counting p itself. Clusters are the connected
 * components of core points; a border point joins the cluster of its
 * lowest-ranked core neighbour, where rank is the lexicographic (x, y)
 * order. Cluster ids are numbered by their lowest-ranked member, so the
 * labelling does not depend on input order.
 */
inline std::vector<int> dbscan(std::span<const Vec2> points, double eps, int min_pts) {
  if (!(eps > 0.0)) throw InvalidInput("dbscan: eps must be positive");
  if (min_pts < 1) throw InvalidInput("dbscan: min_pts must be >= 1");
  const std::size_t n = points.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].x() != points[b].x()) return points[a].x() < points[b].x();
    return points[a].y() < points[b].y();
  });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

  std::unordered_map<detail::CellKey, std::vector<std::size_t>, detail::CellKeyHash> cells;
  auto cell_of = [&](const Vec2& p) {
    return detail::CellKey{static_cast<std::int64_t>(std::floor(p.x() / eps)),
                           static_cast<std::int64_t>(std::floor(p.y() / eps))};
  };
  for (std::size_t i = 0; i < n; ++i) cells[cell_of(points[i])].push_back(i);

  const double eps2 = eps * eps;
  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = cell_of(points[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = cells.find({c.x + dx, c.y + dy});
        if (it == cells.end()) continue;
        for (auto j : it->second)
          if ((points[i] - points[j]).squaredNorm() <= eps2) neighbours[i].push_back(j);
      }
    }
  }

  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = static_cast<int>(neighbours[i].size()) >= min_pts;

  detail::DisjointSet sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for (auto j : neighbours[i])
      if (core[j]) sets.unite(i, j);
  }

  // Root of the owning component; n for noise.
  std::vector<std::size_t> owner(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      owner[i] = sets.find(i);
      continue;
    }
    std::size_t best_rank = n;
    for (auto j : neighbours[i]) {
      if (core[j] && rank[j] < best_rank) {
        best_rank = rank[j];
        owner[i] = sets.find(j);
      }
    }
  }
  std::vector<std::size_t> cluster_min_rank(n, n);
  for (std::size_t i = 0; i < n; ++i)
    if (owner[i] != n) cluster_min_rank[owner[i]] = std::min(cluster_min_rank[owner[i]], rank[i]);

  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < n; ++i)
    if (core[i] && sets.find(i) == i) roots.push_back(i);
  std::sort(roots.begin(), roots.end(),
            [&](std::size_t a, std::size_t b) { return cluster_min_rank[a] < cluster_min_rank[b]; });
  std::vector<int> root_label(n, kNoise);
  for (std::size_t k = 0; k < roots.size(); ++k) root_label[roots[k]] = static_cast<int>(k);

  std::vector<int> labels(n, kNoise);
  for (std::size_t i = 0; i < n; ++i)
    if (owner[i] != n) labels[i] = root_label[owner[i]];
  return labels;
}

/// Labels aligned with vm.voxels iteration order (sorted by VoxelId).
inline std::vector<int> dbscan_bev(const VoxelMasklet& vm, const recon::Reconstruction& recon, double eps,
                                   int min_pts) {
  std::vector<Vec2> bev;
  bev.reserve(vm.voxels.size());
  for (const auto& [v, c] : vm.voxels) {
    const Vec3 p = recon.reference_center(v);
    bev.emplace_back(p.x(), p.y());
  }
  return dbscan(bev, eps, min_pts);
}

struct ClusterSelection {
  VoxelMasklet masklet;
  int cluster = kNoise;
  bool all_noise = false;
};

/**
 * Keeps the cluster with the highest mean vote rate (ties: more voxels, then
 * lower cluster id) and drops everything else, noise included.
 */
inline ClusterSelection select_main_cluster(const VoxelMasklet& vm, std::span<const int> labels) {
  if (labels.size() != vm.voxels.size()) throw InvalidInput("select_main_cluster: labels not aligned with voxels");
  struct Acc {
    double rate_sum = 0.0;
    std::size_t count = 0;
  };
  std::map<int, Acc> acc;
  std::size_t i = 0;
  for (const auto& [v, c] : vm.voxels) {
    if (labels[i] != kNoise) {
      auto& a = acc[labels[i]];
      a.rate_sum += c.rate();
      ++a.count;
    }
    ++i;
  }
  ClusterSelection out;
  out.masklet.id = vm.id;
  out.masklet.cameras = vm.cameras;
  if (acc.empty()) {
    out.all_noise = true;
    return out;
  }
  int best = kNoise;
  double best_mean = -1.0;
  std::size_t best_count = 0;
  for (const auto& [label, a] : acc) {
    const double mean = a.rate_sum / static_cast<double>(a.count);
    if (mean > best_mean || (mean == best_mean && a.count > best_count)) {
      best = label;
      best_mean = mean;
      best_count = a.count;
    }
  }
  out.cluster = best;
  i = 0;
  for (const auto& [v, c] : vm.voxels) {
    if (labels[i] == best) out.masklet.voxels.emplace(v, c);
    ++i;
  }
  return out;
}

}  // namespace m4d::fusion

#endif  // M4D_FUSION_DBSCAN_HPP
