// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Segmenter oracles: the stand-in for a promptable segmentation model.

#ifndef M4D_PROTOCOL_ORACLE_HPP
#define M4D_PROTOCOL_ORACLE_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "m4d/core/mask.hpp"
#include "m4d/protocol/prompt.hpp"

namespace m4d::protocol {

/// Ground truth of one object: per frame, an image mask and a scan mask.
/// An empty mask means the object is absent from that modality.
struct ObjectTruth {
  std::vector<BinaryMask> image;
  std::vector<BinaryMask> lidar;

  [[nodiscard]] const BinaryMask& at(Modality m, int frame) const {
    return (m == Modality::kImage ? image : lidar)[static_cast<std::size_t>(frame)];
  }
  [[nodiscard]] bool present(Modality m, int frame) const { return at(m, frame).any(); }
  [[nodiscard]] bool present(int frame) const {
    return present(Modality::kImage, frame) || present(Modality::kLidar, frame);
  }
};

/// One camera stream plus the LiDAR stream, with ground truth per object.
struct ProtocolSequence {
  std::string id;
  int frames = 0;
  int width = 0;
  int height = 0;
  std::vector<std::vector<Vec3>> scans;  // per frame
  std::map<std::int64_t, ObjectTruth> objects;

  [[nodiscard]] Domain domain(Modality m, int frame) const {
    Domain d;
    d.modality = m;
    d.width = width;
    d.height = height;
    if (m == Modality::kLidar) d.points = &scans[static_cast<std::size_t>(frame)];
    return d;
  }

  void validate() const {
    if (frames < 1) throw InvalidInput("ProtocolSequence: needs at least one frame");
    if (scans.size() != static_cast<std::size_t>(frames))
      throw InvalidInput("ProtocolSequence: " + std::to_string(scans.size()) + " scans for " + std::to_string(frames) +
                         " frames");
    for (const auto& [id, t] : objects) {
      if (t.image.size() != static_cast<std::size_t>(frames) || t.lidar.size() != static_cast<std::size_t>(frames))
        throw InvalidInput("ProtocolSequence: object " + std::to_string(id) + " does not cover every frame");
      for (int f = 0; f < frames; ++f) {
        if (t.image[static_cast<std::size_t>(f)].width != width || t.image[static_cast<std::size_t>(f)].height != height)
          throw InvalidInput("ProtocolSequence: object " + std::to_string(id) + " image mask has wrong size");
        if (t.lidar[static_cast<std::size_t>(f)].size() != scans[static_cast<std::size_t>(f)].size())
          throw InvalidInput("ProtocolSequence: object " + std::to_string(id) + " scan mask has wrong size");
      }
    }
  }
};

/// Predicted masks of one object, same layout as ObjectTruth.
using ObjectPrediction = ObjectTruth;

class SegmenterOracle {
 public:
  virtual ~SegmenterOracle() = default;
  /// Masks for every frame and modality given all prompts so far.
  [[nodiscard]] virtual ObjectPrediction segment(const ProtocolSequence& seq, std::int64_t object,
                                                 std::span<const Prompt> prompts) const = 0;
};

class PerfectOracle final : public SegmenterOracle {
 public:
  [[nodiscard]] ObjectPrediction segment(const ProtocolSequence& seq, std::int64_t object,
                                         std::span<const Prompt>) const override {
    return seq.objects.at(object);
  }
};

enum class CorruptionMode : std::uint8_t {
  kMixed,   // erode, dilate or drop, equally likely
  kDrop,    // empty mask
  kShrink,  // keep the first ceil(floor * |gt|) elements
};

struct NoiseConfig {
  std::uint64_t seed = 0;
  double rate = 0.1;
  int magnitude = 1;       // erosion/dilation steps
  CorruptionMode mode = CorruptionMode::kMixed;
  double iou_floor = 0.5;  // shrink mode
  double link_radius = 0.3;

  void validate() const {
    if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidInput("NoiseConfig: rate must be in [0, 1]");
    if (magnitude < 0) throw InvalidInput("NoiseConfig: magnitude must be non-negative");
    if (!(iou_floor >= 0.0 && iou_floor <= 1.0)) throw InvalidInput("NoiseConfig: iou_floor must be in [0, 1]");
  }
};

namespace detail {

inline BinaryMask morph_step(const Domain& d, const BinaryMask& m, bool dilate, double link_radius) {
  BinaryMask out = m;
  const double r2 = link_radius * link_radius;
  for (std::size_t i = 0; i < m.bits.size(); ++i) {
    if (static_cast<bool>(m.bits[i]) == dilate) continue;
    // A dilation turns on elements next to the mask; an erosion turns off
    // elements next to the outside.
    bool flip = false;
    if (d.modality == Modality::kImage) {
      const auto w = static_cast<std::size_t>(d.width);
      const std::size_t u = i % w;
      const std::size_t v = i / w;
      const bool want = dilate;
      if (u > 0 && static_cast<bool>(m.bits[i - 1]) == want) flip = true;
      if (u + 1 < w && static_cast<bool>(m.bits[i + 1]) == want) flip = true;
      if (v > 0 && static_cast<bool>(m.bits[i - w]) == want) flip = true;
      if (v + 1 < static_cast<std::size_t>(d.height) && static_cast<bool>(m.bits[i + w]) == want) flip = true;
      if (!dilate && (u == 0 || v == 0 || u + 1 == w || v + 1 == static_cast<std::size_t>(d.height))) flip = true;
    } else {
      for (std::size_t j = 0; j < m.bits.size() && !flip; ++j)
        if (j != i && static_cast<bool>(m.bits[j]) == dilate &&
            ((*d.points)[i] - (*d.points)[j]).squaredNorm() < r2)
          flip = true;
    }
    if (flip) out.bits[i] = dilate ? 1 : 0;
  }
  return out;
}

inline std::uint64_t corruption_key(std::uint64_t seed, std::int64_t object, int frame, Modality m) {
  std::size_t h = m4d::detail::hash_mix(static_cast<std::size_t>(seed), static_cast<std::uint64_t>(object));
  h = m4d::detail::hash_mix(h, static_cast<std::uint64_t>(frame));
  return m4d::detail::hash_mix(h, static_cast<std::uint64_t>(m));
}

}  // namespace detail

/**
 * Returns ground truth, corrupted per (frame, modality) with probability
 * `rate`. The corruption of a frame depends only on (seed, object, frame,
 * modality). Any prompt on a frame pins both modalities of that frame to
 * ground truth.
 */
class NoisyGtOracle final : public SegmenterOracle {
 public:
  explicit NoisyGtOracle(NoiseConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  [[nodiscard]] const NoiseConfig& config() const { return cfg_; }

  [[nodiscard]] bool corrupted(std::int64_t object, int frame, Modality m) const {
    std::mt19937_64 rng(detail::corruption_key(cfg_.seed, object, frame, m));
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg_.rate;
  }

  [[nodiscard]] BinaryMask corrupt(const ProtocolSequence& seq, std::int64_t object, int frame, Modality m) const {
    const BinaryMask& gt = seq.objects.at(object).at(m, frame);
    std::mt19937_64 rng(detail::corruption_key(cfg_.seed, object, frame, m));
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (!(u < cfg_.rate)) return gt;
    const Domain d = seq.domain(m, frame);
    switch (cfg_.mode) {
      case CorruptionMode::kDrop: return d.empty_mask();
      case CorruptionMode::kShrink: {
        const std::size_t n = gt.count();
        const auto keep = static_cast<std::size_t>(std::ceil(cfg_.iou_floor * static_cast<double>(n) - 1e-9));
        BinaryMask out = d.empty_mask();
        std::size_t kept = 0;
        for (std::size_t i = 0; i < gt.bits.size() && kept < keep; ++i)
          if (gt.bits[i]) {
            out.bits[i] = 1;
            ++kept;
          }
        return out;
      }
      case CorruptionMode::kMixed: break;
    }
    const int op = std::uniform_int_distribution<int>(0, 2)(rng);
    if (op == 2) return d.empty_mask();
    BinaryMask out = gt;
    for (int s = 0; s < cfg_.magnitude; ++s) out = detail::morph_step(d, out, op == 1, cfg_.link_radius);
    return out;
  }

  [[nodiscard]] ObjectPrediction segment(const ProtocolSequence& seq, std::int64_t object,
                                         std::span<const Prompt> prompts) const override {
    std::set<int> pinned;
    for (const auto& p : prompts) pinned.insert(p.frame);
    const ObjectTruth& gt = seq.objects.at(object);
    ObjectPrediction out;
    for (int f = 0; f < seq.frames; ++f) {
      const bool pin = pinned.count(f) > 0;
      out.image.push_back(pin ? gt.image[static_cast<std::size_t>(f)] : corrupt(seq, object, f, Modality::kImage));
      out.lidar.push_back(pin ? gt.lidar[static_cast<std::size_t>(f)] : corrupt(seq, object, f, Modality::kLidar));
    }
    return out;
  }

 private:
  NoiseConfig cfg_;
};

inline NoisyGtOracle noisy_gt_oracle(std::uint64_t seed, double corruption_rate, int magnitude = 1,
                                     CorruptionMode mode = CorruptionMode::kMixed) {
  NoiseConfig cfg;
  cfg.seed = seed;
  cfg.rate = corruption_rate;
  cfg.magnitude = magnitude;
  cfg.mode = mode;
  return NoisyGtOracle(cfg);
}

}  // namespace m4d::protocol

#endif  // M4D_PROTOCOL_ORACLE_HPP
