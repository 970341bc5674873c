// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Mask prediction losses and their weighted combination
// (focal 20 : dice 1 : IoU-prediction L1 1).

#ifndef M4D_METRICS_LOSSES_HPP
#define M4D_METRICS_LOSSES_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "m4d/core/types.hpp"

namespace m4d::metrics {

namespace detail {
inline void check_aligned(std::span<const double> p, std::span<const std::uint8_t> g, const char* who) {
  if (p.size() != g.size()) throw InvalidInput(std::string(who) + ": prediction and target sizes differ");
  if (p.empty()) throw InvalidInput(std::string(who) + ": empty input");
}
}  // namespace detail

/**
 * Mean over elements of -alpha_t (1 - p_t)^gamma log(p_t), with
 * p_t = p for positives and 1 - p for negatives, alpha_t = alpha for
 * positives and 1 - alpha for negatives.
 */
inline double focal_loss(std::span<const double> probs, std::span<const std::uint8_t> gt, double gamma = 2.0,
                         double alpha = 0.25) {
  detail::check_aligned(probs, gt, "focal_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p > 0.0 && p < 1.0)) throw InvalidInput("focal_loss: probabilities must lie in (0, 1)");
    const bool pos = gt[i] != 0;
    const double pt = pos ? p : 1.0 - p;
    const double at = pos ? alpha : 1.0 - alpha;
    sum += -at * std::pow(1.0 - pt, gamma) * std::log(pt);
  }
  return sum / static_cast<double>(probs.size());
}

/// 1 - (2 sum(p g) + s) / (sum(p) + sum(g) + s).
inline double dice_loss(std::span<const double> probs, std::span<const std::uint8_t> gt, double smooth = 1.0) {
  detail::check_aligned(probs, gt, "dice_loss");
  double inter = 0.0;
  double sp = 0.0;
  double sg = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("dice_loss: probabilities must lie in [0, 1]");
    const double g = gt[i] != 0 ? 1.0 : 0.0;
    inter += p * g;
    sp += p;
    sg += g;
  }
  return 1.0 - (2.0 * inter + smooth) / (sp + sg + smooth);
}

struct LossWeights {
  double focal = 20.0;
  double dice = 1.0;
  double iou = 1.0;
};

struct LossBreakdown {
  double focal = 0.0;
  double dice = 0.0;
  double iou_l1 = 0.0;
  double total = 0.0;
};

/**
 * Weighted mask loss. The IoU term is |predicted_iou - IoU(p > 0.5, gt)|.
 */
inline LossBreakdown mask_loss(std::span<const double> probs, std::span<const std::uint8_t> gt, double predicted_iou,
                               const LossWeights& w = {}, double gamma = 2.0, double alpha = 0.25) {
  LossBreakdown out;
  out.focal = focal_loss(probs, gt, gamma, alpha);
  out.dice = dice_loss(probs, gt);
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool a = probs[i] > 0.5;
    const bool b = gt[i] != 0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  const double actual = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  out.iou_l1 = std::abs(predicted_iou - actual);
  out.total = w.focal * out.focal + w.dice * out.dice + w.iou * out.iou_l1;
  return out;
}

}  // namespace m4d::metrics

#endif  // M4D_METRICS_LOSSES_HPP
