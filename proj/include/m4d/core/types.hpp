// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Shared vocabulary types: vectors, modalities, voxel identities, errors.

#ifndef M4D_CORE_TYPES_HPP
#define M4D_CORE_TYPES_HPP

#include <Eigen/Core>

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace m4d {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised whenever an operation's precondition is violated by its input.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Modality : std::uint8_t { kImage = 0, kLidar = 1 };

inline const char* to_string(Modality m) {
  return m == Modality::kImage ? "image" : "lidar";
}

/// Integer voxel coordinates: floor(position / voxel_size) per axis.
struct VoxelKey {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  auto operator<=>(const VoxelKey&) const = default;
};

/// Which grid a voxel lives in. The background grid is world-framed; each
/// foreground grid is framed in its object's body coordinates.
struct GridTag {
  static constexpr std::int64_t kBackground = -1;
  std::int64_t object_id = kBackground;

  [[nodiscard]] bool is_background() const { return object_id == kBackground; }
  static GridTag background() { return {}; }
  static GridTag object(std::int64_t id) { return GridTag{id}; }

  auto operator<=>(const GridTag&) const = default;
};

/// A voxel identity that is unique across all grids of a reconstruction.
struct VoxelId {
  GridTag grid;
  VoxelKey key;

  auto operator<=>(const VoxelId&) const = default;
};

namespace detail {
inline std::size_t hash_mix(std::size_t seed, std::uint64_t v) {
  v ^= v >> 33;
  v *= 0xff51afd7ed558ccdULL;
  v ^= v >> 33;
  v *= 0xc4ceb9fe1a85ec53ULL;
  v ^= v >> 33;
  return seed ^ (static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ULL +
                 (seed << 6) + (seed >> 2));
}
}  // namespace detail

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::size_t h = 0;
    h = detail::hash_mix(h, static_cast<std::uint32_t>(k.x));
    h = detail::hash_mix(h, static_cast<std::uint32_t>(k.y));
    h = detail::hash_mix(h, static_cast<std::uint32_t>(k.z));
    return h;
  }
};

struct VoxelIdHash {
  std::size_t operator()(const VoxelId& id) const noexcept {
    return detail::hash_mix(VoxelKeyHash{}(id.key),
                            static_cast<std::uint64_t>(id.grid.object_id));
  }
};

inline bool all_finite(const Vec3& p) { return p.allFinite(); }

}  // namespace m4d

#endif  // M4D_CORE_TYPES_HPP
