// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Prompts and the per-frame element domains they refer to.

#ifndef M4D_PROTOCOL_PROMPT_HPP
#define M4D_PROTOCOL_PROMPT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "m4d/core/mask.hpp"
#include "m4d/core/types.hpp"

namespace m4d::protocol {

enum class PromptKind : std::uint8_t { kPositiveClick, kNegativeClick, kBox, kMask };

inline const char* to_string(PromptKind k) {
  switch (k) {
    case PromptKind::kPositiveClick: return "positive_click";
    case PromptKind::kNegativeClick: return "negative_click";
    case PromptKind::kBox: return "box";
    case PromptKind::kMask: return "mask";
  }
  return "?";
}

/// The elements one modality exposes at one frame: pixels of a width x height
/// image, or the points of a scan.
struct Domain {
  Modality modality = Modality::kImage;
  int width = 0;
  int height = 0;
  const std::vector<Vec3>* points = nullptr;  // LiDAR only

  [[nodiscard]] std::size_t size() const {
    return modality == Modality::kImage ? static_cast<std::size_t>(width) * static_cast<std::size_t>(height)
                                        : points->size();
  }
  /// Pixel (u, v, 0) or point position.
  [[nodiscard]] Vec3 coord(std::size_t i) const {
    if (modality == Modality::kLidar) return (*points)[i];
    return {static_cast<double>(i % static_cast<std::size_t>(width)),
            static_cast<double>(i / static_cast<std::size_t>(width)), 0.0};
  }
  [[nodiscard]] BinaryMask empty_mask() const {
    return modality == Modality::kImage ? BinaryMask(width, height) : BinaryMask::points(points->size());
  }
};

struct Click {
  std::size_t element = 0;  // pixel index (row-major) or point index
  Vec3 coord = Vec3::Zero();
};

/// Axis-aligned box: pixel corners (z = 0) or a 3D box.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
};

struct MaskPayload {
  BinaryMask mask;
};

using Payload = std::variant<Click, Box, MaskPayload>;

struct Prompt {
  Modality modality = Modality::kImage;
  PromptKind kind = PromptKind::kPositiveClick;
  int frame = 0;
  Payload payload;

  /// Throws when the payload does not fit the kind or lies outside `domain`.
  void validate(const Domain& domain) const {
    const bool click = kind == PromptKind::kPositiveClick || kind == PromptKind::kNegativeClick;
    if (click != std::holds_alternative<Click>(payload) ||
        (kind == PromptKind::kBox) != std::holds_alternative<Box>(payload) ||
        (kind == PromptKind::kMask) != std::holds_alternative<MaskPayload>(payload))
      throw InvalidInput(std::string("Prompt: payload does not match kind ") + to_string(kind));
    if (domain.modality != modality) throw InvalidInput("Prompt: modality does not match domain");
    if (const auto* c = std::get_if<Click>(&payload)) {
      if (c->element >= domain.size()) throw InvalidInput("Prompt: click outside frame bounds");
    } else if (const auto* b = std::get_if<Box>(&payload)) {
      if ((b->lo.array() > b->hi.array()).any()) throw InvalidInput("Prompt: box corners inverted");
      if (modality == Modality::kImage &&
          (b->lo.x() < 0 || b->lo.y() < 0 || b->hi.x() > domain.width - 1 || b->hi.y() > domain.height - 1))
        throw InvalidInput("Prompt: box outside frame bounds");
    } else {
      const auto& m = std::get<MaskPayload>(payload).mask;
      if (m.size() != domain.size()) throw InvalidInput("Prompt: mask size does not match frame");
    }
  }
};

/// Tight box around the set elements of `m` (nothing if empty).
inline std::optional<Box> bounding_box(const Domain& domain, const BinaryMask& m) {
  std::optional<Box> out;
  for (std::size_t i = 0; i < m.bits.size(); ++i) {
    if (!m.bits[i]) continue;
    const Vec3 c = domain.coord(i);
    if (!out) {
      out = Box{c, c};
    } else {
      out->lo = out->lo.cwiseMin(c);
      out->hi = out->hi.cwiseMax(c);
    }
  }
  return out;
}

}  // namespace m4d::protocol

#endif  // M4D_PROTOCOL_PROMPT_HPP
