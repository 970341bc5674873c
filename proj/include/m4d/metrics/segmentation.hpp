// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Segmentation quality: IoU, region/boundary J&F, mismatched predictions.

#ifndef M4D_METRICS_SEGMENTATION_HPP
#define M4D_METRICS_SEGMENTATION_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "m4d/core/distance.hpp"
#include "m4d/core/mask.hpp"
#include "m4d/core/types.hpp"

namespace m4d::metrics {

struct IouResult {
  double value = 1.0;
  bool both_empty = false;
};

/// |A and B| / |A or B|; two empty masks score 1.0 with both_empty set.
inline IouResult iou_detail(const BinaryMask& pred, const BinaryMask& gt) {
  if (!pred.same_shape(gt)) throw InvalidInput("iou: mask shapes differ");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pred.bits.size(); ++i) {
    const bool a = pred.bits[i] != 0;
    const bool b = gt.bits[i] != 0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return {1.0, true};
  return {static_cast<double>(inter) / static_cast<double>(uni), false};
}

inline double iou(const BinaryMask& pred, const BinaryMask& gt) { return iou_detail(pred, gt).value; }

/// Mask pixels with at least one 4-neighbour outside the mask (pixels beyond
/// the image border count as outside).
inline BinaryMask boundary(const BinaryMask& m) {
  BinaryMask out(m.width, m.height);
  for (int v = 0; v < m.height; ++v) {
    for (int u = 0; u < m.width; ++u) {
      if (!m.get(u, v)) continue;
      const bool edge = u == 0 || v == 0 || u == m.width - 1 || v == m.height - 1 || !m.get(u - 1, v) ||
                        !m.get(u + 1, v) || !m.get(u, v - 1) || !m.get(u, v + 1);
      if (edge) out.set(u, v);
    }
  }
  return out;
}

/// Boundary match radius in pixels. Values below 1 are a fraction of the
/// image diagonal, rounded up.
inline double boundary_radius(double tolerance, int width, int height) {
  if (tolerance >= 1.0) return tolerance;
  return std::ceil(tolerance * std::hypot(static_cast<double>(width), static_cast<double>(height)));
}

inline constexpr double kDefaultBoundaryTolerance = 0.008;

/// Boundary F-measure of one frame.
inline double boundary_f(const BinaryMask& pred, const BinaryMask& gt, double tolerance = kDefaultBoundaryTolerance) {
  if (!pred.same_shape(gt)) throw InvalidInput("boundary_f: mask shapes differ");
  const BinaryMask pb = boundary(pred);
  const BinaryMask gb = boundary(gt);
  const std::size_t np = pb.count();
  const std::size_t ng = gb.count();
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const double r = boundary_radius(tolerance, pred.width, pred.height);
  const double r2 = r * r;
  const auto to_gt = squared_distance_to(gb);
  const auto to_pred = squared_distance_to(pb);
  std::size_t matched_pred = 0;
  std::size_t matched_gt = 0;
  for (std::size_t i = 0; i < pb.bits.size(); ++i) {
    if (pb.bits[i] && to_gt[i] <= r2) ++matched_pred;
    if (gb.bits[i] && to_pred[i] <= r2) ++matched_gt;
  }
  const double precision = static_cast<double>(matched_pred) / static_cast<double>(np);
  const double recall = static_cast<double>(matched_gt) / static_cast<double>(ng);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

struct JfScore {
  double j = 0.0;
  double f = 0.0;
  double jf = 0.0;
};

/// J = mean per-frame IoU, F = mean per-frame boundary F, J&F = (J + F) / 2.
inline JfScore jf_score(std::span<const BinaryMask> pred_track, std::span<const BinaryMask> gt_track,
                        double tolerance = kDefaultBoundaryTolerance) {
  if (pred_track.empty()) throw InvalidInput("jf_score: empty track");
  if (pred_track.size() != gt_track.size()) throw InvalidInput("jf_score: tracks cover different frame ranges");
  double j = 0.0;
  double f = 0.0;
  for (std::size_t i = 0; i < pred_track.size(); ++i) {
    j += iou(pred_track[i], gt_track[i]);
    f += boundary_f(pred_track[i], gt_track[i], tolerance);
  }
  const double n = static_cast<double>(pred_track.size());
  JfScore s{j / n, f / n, 0.0};
  s.jf = (s.j + s.f) / 2.0;
  return s;
}

/// One (object, frame, modality) evaluation instance.
struct EvalRecord {
  std::int64_t object = 0;
  int frame = 0;
  Modality modality = Modality::kImage;
  BinaryMask pred;
  BinaryMask gt;
  bool gt_present = true;
  bool pred_present = true;
};

inline constexpr double kMismatchIou = 0.01;

[[nodiscard]] inline bool is_mismatch(const EvalRecord& r) {
  return r.gt_present && iou(r.pred, r.gt) < kMismatchIou;
}

/// Instances with ground truth present and IoU below 0.01.
inline std::size_t nmp_count(std::span<const EvalRecord> records) {
  std::size_t n = 0;
  for (const auto& r : records)
    if (is_mismatch(r)) ++n;
  return n;
}

/// Mean IoU over records of `modality` whose ground truth is present.
inline std::optional<double> mean_iou(std::span<const EvalRecord> records, Modality modality) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.modality != modality || !r.gt_present) continue;
    s += iou(r.pred, r.gt);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

}  // namespace m4d::metrics

#endif  // M4D_METRICS_SEGMENTATION_HPP
