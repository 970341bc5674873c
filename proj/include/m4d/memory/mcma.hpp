// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Motion-aware cross-modal memory attention (forward pass only).
//
//   F'      = SelfAttn(F + P)                       per modality
//   F''     = CrossAttn(F', F'_other + P_other)     per modality
//   M^{t<-t'} = M^{t'} + Phi(T_{t<-t'} x)            per stored entry
//   F_final = CrossAttn(F'', [M^{t<-t'} ; O^{t'}] over all entries)

#ifndef M4D_MEMORY_MCMA_HPP
#define M4D_MEMORY_MCMA_HPP

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "m4d/geometry/pose.hpp"
#include "m4d/geometry/posenc.hpp"
#include "m4d/memory/attention.hpp"
#include "m4d/memory/bank.hpp"

namespace m4d::memory {

using geometry::Pose;
using geometry::UmpeParams;

namespace detail {
inline geometry::EncodingSite site_of(const FeatureMap& fm, std::size_t i, const Vec3& position) {
  if (fm.modality == Modality::kImage) {
    if (fm.pixels.size() != fm.positions.size()) {
      throw InvalidInput("positional encoding: image tokens need their source pixels");
    }
    return geometry::EncodingSite::image(fm.pixels[i], position);
  }
  return geometry::EncodingSite::lidar(position);
}
}  // namespace detail

/// Phi evaluated at every token's position after applying `motion`.
inline PosEncodings encode_positions(const FeatureMap& fm, const UmpeParams& params,
                                     const Pose& motion = Pose::identity()) {
  fm.validate();
  PosEncodings pe(fm.size(), params.dim);
  for (std::size_t i = 0; i < fm.positions.size(); ++i) {
    pe.row(static_cast<Eigen::Index>(i)) =
        geometry::umpe(detail::site_of(fm, i, motion.apply(fm.positions[i])), params).values.transpose();
  }
  return pe;
}

struct CompensatedMemory {
  std::optional<Matrix> image;
  std::optional<Matrix> lidar;

  [[nodiscard]] const std::optional<Matrix>& modality(Modality m) const {
    return m == Modality::kImage ? image : lidar;
  }
};

/// M + Phi(T x) for each stored modality. The entry itself is not modified.
inline CompensatedMemory compensate_memory(const MemoryEntry& entry, const Pose& ego_motion,
                                           const UmpeParams& params) {
  CompensatedMemory out;
  if (entry.image) {
    out.image = entry.image->features.tokens + encode_positions(entry.image->features, params, ego_motion);
  }
  if (entry.lidar) {
    out.lidar = entry.lidar->features.tokens + encode_positions(entry.lidar->features, params, ego_motion);
  }
  return out;
}

/// Concatenated compensated tokens plus one summary token per entry.
inline Matrix temporal_keys(Modality modality, std::span<const std::reference_wrapper<const MemoryEntry>> entries,
                            std::span<const Pose> ego_motions, const UmpeParams& params, Eigen::Index dim) {
  if (entries.size() != ego_motions.size()) {
    throw InvalidInput("temporal_attend: need exactly one ego motion per memory entry");
  }
  std::vector<Matrix> blocks;
  Eigen::Index rows = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& stored = entries[i].get().modality(modality);
    if (!stored) continue;
    if (stored->features.dim() != dim || stored->summary.size() != dim) {
      throw InvalidInput("temporal_attend: memory dimension differs from current features");
    }
    const auto comp = compensate_memory(entries[i].get(), ego_motions[i], params);
    Matrix block(stored->features.size() + 1, dim);
    block.topRows(stored->features.size()) = *comp.modality(modality);
    block.bottomRows(1) = stored->summary.transpose();
    rows += block.rows();
    blocks.push_back(std::move(block));
  }
  Matrix keys(rows, dim);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    keys.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return keys;
}

inline FeatureMap temporal_attend(const FeatureMap& current,
                                  std::span<const std::reference_wrapper<const MemoryEntry>> entries,
                                  std::span<const Pose> ego_motions, const UmpeParams& params, int heads = 1) {
  current.validate();
  const Matrix keys = temporal_keys(current.modality, entries, ego_motions, params, current.dim());
  if (keys.rows() == 0) return current;
  FeatureMap out = current;
  out.tokens = attend(current.tokens, keys, keys, heads);
  return out;
}

/// Ego motions follow MemoryBank::entries() order.
inline FeatureMap temporal_attend(const FeatureMap& current, const MemoryBank& bank,
                                  std::span<const Pose> ego_motions, const UmpeParams& params, int heads = 1) {
  const auto entries = bank.entries();
  return temporal_attend(current, std::span(entries), ego_motions, params, heads);
}

struct McmaOutput {
  FeatureMap image;
  FeatureMap lidar;
};

/// Self-attention, cross-modal attention, then temporal attention.
inline McmaOutput mcma_forward(const FeatureMap& image, const FeatureMap& lidar, const MemoryBank& bank,
                               std::span<const Pose> ego_motions, const UmpeParams& params, int heads = 1) {
  if (image.modality != Modality::kImage || lidar.modality != Modality::kLidar) {
    throw InvalidInput("mcma_forward: feature maps passed in the wrong modality slots");
  }
  const PosEncodings pe_img = encode_positions(image, params);
  const PosEncodings pe_lidar = encode_positions(lidar, params);
  const FeatureMap img1 = self_attend(image, pe_img, heads);
  const FeatureMap lid1 = self_attend(lidar, pe_lidar, heads);
  const FeatureMap img2 = cross_attend_modal(img1, lid1, pe_lidar, heads);
  const FeatureMap lid2 = cross_attend_modal(lid1, img1, pe_img, heads);
  return {temporal_attend(img2, bank, ego_motions, params, heads),
          temporal_attend(lid2, bank, ego_motions, params, heads)};
}

}  // namespace m4d::memory

#endif  // M4D_MEMORY_MCMA_HPP
