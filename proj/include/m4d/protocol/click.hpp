// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Corrective click placement.

#ifndef M4D_PROTOCOL_CLICK_HPP
#define M4D_PROTOCOL_CLICK_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "m4d/core/distance.hpp"
#include "m4d/core/mask.hpp"
#include "m4d/protocol/prompt.hpp"

namespace m4d::protocol {

inline constexpr double kDefaultLidarLinkRadius = 0.3;

/// Connected components of the set elements of `m`, each sorted ascending and
/// listed by their lowest element. Pixels connect 4-wise; points connect when
/// closer than `link_radius`.
inline std::vector<std::vector<std::size_t>> components(const Domain& domain, const BinaryMask& m,
                                                        double link_radius = kDefaultLidarLinkRadius) {
  std::vector<int> label(m.bits.size(), -1);
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> members;
  if (domain.modality == Modality::kLidar) members = [&] {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < m.bits.size(); ++i)
      if (m.bits[i]) v.push_back(i);
    return v;
  }();
  const double r2 = link_radius * link_radius;
  for (std::size_t seed = 0; seed < m.bits.size(); ++seed) {
    if (!m.bits[seed] || label[seed] >= 0) continue;
    const int id = static_cast<int>(out.size());
    std::vector<std::size_t> comp;
    std::vector<std::size_t> stack{seed};
    label[seed] = id;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      comp.push_back(i);
      auto visit = [&](std::size_t j) {
        if (m.bits[j] && label[j] < 0) {
          label[j] = id;
          stack.push_back(j);
        }
      };
      if (domain.modality == Modality::kImage) {
        const auto w = static_cast<std::size_t>(domain.width);
        const std::size_t u = i % w;
        const std::size_t v = i / w;
        if (u > 0) visit(i - 1);
        if (u + 1 < w) visit(i + 1);
        if (v > 0) visit(i - w);
        if (v + 1 < static_cast<std::size_t>(domain.height)) visit(i + w);
      } else {
        for (auto j : members)
          if (label[j] < 0 && ((*domain.points)[i] - (*domain.points)[j]).squaredNorm() < r2) visit(j);
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

/**
 * Distance of each element of `region` to the nearest element outside it.
 * Pixels beyond the image border count as outside. For points the distance
 * is to the nearest scan point not in the region (infinite if none).
 */
inline std::vector<double> interior_distance(const Domain& domain, const std::vector<std::size_t>& region) {
  std::vector<double> out;
  out.reserve(region.size());
  if (domain.modality == Modality::kImage) {
    const int pw = domain.width + 2;
    const int ph = domain.height + 2;
    BinaryMask outside(pw, ph);
    std::fill(outside.bits.begin(), outside.bits.end(), 1);
    for (auto i : region) {
      const int u = static_cast<int>(i % static_cast<std::size_t>(domain.width));
      const int v = static_cast<int>(i / static_cast<std::size_t>(domain.width));
      outside.set(u + 1, v + 1, false);
    }
    const auto d2 = squared_distance_to(outside);
    for (auto i : region) {
      const int u = static_cast<int>(i % static_cast<std::size_t>(domain.width));
      const int v = static_cast<int>(i / static_cast<std::size_t>(domain.width));
      out.push_back(std::sqrt(d2[static_cast<std::size_t>(v + 1) * static_cast<std::size_t>(pw) +
                                 static_cast<std::size_t>(u + 1)]));
    }
    return out;
  }
  std::vector<std::uint8_t> inside(domain.size(), 0);
  for (auto i : region) inside[i] = 1;
  for (auto i : region) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < inside.size(); ++j)
      if (!inside[j]) best = std::min(best, ((*domain.points)[i] - (*domain.points)[j]).squaredNorm());
    out.push_back(std::sqrt(best));
  }
  return out;
}

/// Element of `region` farthest from its outside; ties go to the lowest index.
inline std::size_t interior_most(const Domain& domain, const std::vector<std::size_t>& region) {
  const auto d = interior_distance(domain, region);
  std::size_t best = 0;
  for (std::size_t k = 1; k < region.size(); ++k)
    if (d[k] > d[best] || (d[k] == d[best] && region[k] < region[best])) best = k;
  return region[best];
}

/**
 * Places one corrective click: positive inside the largest false-negative
 * region or negative inside the largest false-positive region, whichever is
 * larger (ties: positive, then the region with the lowest element). Returns
 * nothing when prediction and ground truth agree.
 */
inline std::optional<Prompt> sample_click(const Domain& domain, const BinaryMask& pred, const BinaryMask& gt, int frame,
                                          double link_radius = kDefaultLidarLinkRadius) {
  if (pred.size() != domain.size() || gt.size() != domain.size())
    throw InvalidInput("sample_click: mask size does not match frame");
  if (!gt.any()) throw InvalidInput("sample_click: ground truth is empty");
  BinaryMask fn = domain.empty_mask();
  BinaryMask fp = domain.empty_mask();
  for (std::size_t i = 0; i < gt.bits.size(); ++i) {
    fn.bits[i] = (gt.bits[i] && !pred.bits[i]) ? 1 : 0;
    fp.bits[i] = (pred.bits[i] && !gt.bits[i]) ? 1 : 0;
  }
  const auto largest = [](const std::vector<std::vector<std::size_t>>& comps) -> const std::vector<std::size_t>* {
    const std::vector<std::size_t>* best = nullptr;
    for (const auto& c : comps)
      if (!best || c.size() > best->size()) best = &c;  // comps are ordered by lowest element
    return best;
  };
  const auto fn_comps = components(domain, fn, link_radius);
  const auto fp_comps = components(domain, fp, link_radius);
  const auto* a = largest(fn_comps);
  const auto* b = largest(fp_comps);
  if (!a && !b) return std::nullopt;
  const bool positive = a && (!b || a->size() >= b->size());
  const auto& region = positive ? *a : *b;
  const std::size_t e = interior_most(domain, region);
  return Prompt{domain.modality, positive ? PromptKind::kPositiveClick : PromptKind::kNegativeClick, frame,
                Click{e, domain.coord(e)}};
}

}  // namespace m4d::protocol

#endif  // M4D_PROTOCOL_CLICK_HPP
