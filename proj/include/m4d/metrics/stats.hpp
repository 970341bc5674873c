// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Dataset statistics over fused masklets.

#ifndef M4D_METRICS_STATS_HPP
#define M4D_METRICS_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace m4d::metrics {

/// Everything the report needs, already counted per masklet.
struct DatasetInput {
  std::vector<std::pair<int, int>> images;  // every (camera, frame) in the sequence
  int frame_count = 0;
  std::map<std::int64_t, std::map<std::pair<int, int>, std::size_t>> image_area;  // non-empty masks only
  std::map<std::int64_t, std::map<int, std::size_t>> scan_points;                 // non-empty masks only
  std::map<std::int64_t, std::size_t> volume;                                     // voxels
  std::map<std::int64_t, std::optional<double>> score;
};

struct Histogram {
  std::vector<double> edges;  // bin i covers [edges[i], edges[i+1])
  std::vector<std::size_t> counts;

  void add(double x) {
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      const bool last = i + 2 == edges.size();
      if (x >= edges[i] && (x < edges[i + 1] || (last && x <= edges[i + 1]))) {
        ++counts[i];
        return;
      }
    }
  }

  /// Edges 1, 2, 4, ... up to the first power of two above `max_value`.
  static Histogram log2_bins(double max_value) {
    Histogram h;
    h.edges.push_back(1.0);
    while (h.edges.back() <= max_value) h.edges.push_back(h.edges.back() * 2.0);
    if (h.edges.size() < 2) h.edges.push_back(2.0);
    h.counts.assign(h.edges.size() - 1, 0);
    return h;
  }

  static Histogram uniform(double lo, double hi, int bins) {
    Histogram h;
    for (int i = 0; i <= bins; ++i) h.edges.push_back(lo + (hi - lo) * i / bins);
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    return h;
  }
};

struct DatasetReport {
  std::size_t masklets = 0;
  double masks_per_image = 0.0;
  double masks_per_scan = 0.0;
  Histogram volume;
  Histogram area;
  Histogram score;
  std::size_t unscored = 0;
  /// Frames present in both modalities / frames present in either.
  std::map<std::int64_t, double> co_occurrence;
};

inline DatasetReport dataset_stats(const DatasetInput& in) {
  DatasetReport r;
  std::set<std::int64_t> ids;
  for (const auto& [id, m] : in.image_area) ids.insert(id);
  for (const auto& [id, m] : in.scan_points) ids.insert(id);
  for (const auto& [id, v] : in.volume) ids.insert(id);
  r.masklets = ids.size();

  std::size_t image_masks = 0;
  std::size_t max_area = 0;
  for (const auto& [id, per_image] : in.image_area) {
    image_masks += per_image.size();
    for (const auto& [img, a] : per_image) max_area = std::max(max_area, a);
  }
  std::size_t scan_masks = 0;
  for (const auto& [id, per_frame] : in.scan_points) scan_masks += per_frame.size();
  if (!in.images.empty()) r.masks_per_image = static_cast<double>(image_masks) / static_cast<double>(in.images.size());
  if (in.frame_count > 0) r.masks_per_scan = static_cast<double>(scan_masks) / static_cast<double>(in.frame_count);

  std::size_t max_volume = 0;
  for (const auto& [id, v] : in.volume) max_volume = std::max(max_volume, v);
  r.volume = Histogram::log2_bins(static_cast<double>(max_volume));
  for (const auto& [id, v] : in.volume) r.volume.add(static_cast<double>(v));
  r.area = Histogram::log2_bins(static_cast<double>(max_area));
  for (const auto& [id, per_image] : in.image_area)
    for (const auto& [img, a] : per_image) r.area.add(static_cast<double>(a));
  r.score = Histogram::uniform(0.0, 1.0, 10);
  for (const auto& [id, s] : in.score) {
    if (s) r.score.add(*s);
    else ++r.unscored;
  }

  for (auto id : ids) {
    std::set<int> image_frames;
    std::set<int> scan_frames;
    if (auto it = in.image_area.find(id); it != in.image_area.end())
      for (const auto& [img, a] : it->second) image_frames.insert(img.second);
    if (auto it = in.scan_points.find(id); it != in.scan_points.end())
      for (const auto& [f, n] : it->second) scan_frames.insert(f);
    std::set<int> either = image_frames;
    either.insert(scan_frames.begin(), scan_frames.end());
    std::size_t both = 0;
    for (int f : image_frames) both += scan_frames.count(f);
    r.co_occurrence[id] = either.empty() ? 0.0 : static_cast<double>(both) / static_cast<double>(either.size());
  }
  return r;
}

}  // namespace m4d::metrics

#endif  // M4D_METRICS_STATS_HPP
