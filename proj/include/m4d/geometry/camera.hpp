// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Pinhole camera model and pixel lifting.
// Camera axes: +z forward, +x right, +y down. Pixel (u, v) is the center of
// column u, row v.

#ifndef M4D_GEOMETRY_CAMERA_HPP
#define M4D_GEOMETRY_CAMERA_HPP

#include <cmath>
#include <optional>
#include <variant>
#include <vector>

#include "m4d/core/types.hpp"
#include "m4d/geometry/pose.hpp"

namespace m4d::geometry {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidInput("CameraIntrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidInput("CameraIntrinsics: image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
      throw InvalidInput("CameraIntrinsics: principal point outside the image");
    }
  }

  [[nodiscard]] Mat3 matrix() const {
    Mat3 k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  /// Unit-depth ray (z = 1) through pixel (u, v) in camera axes.
  [[nodiscard]] Vec3 unproject(double u, double v) const {
    return {(u - cx) / fx, (v - cy) / fy, 1.0};
  }

  [[nodiscard]] bool contains(double u, double v) const {
    return u > -0.5 && v > -0.5 && u < width - 0.5 && v < height - 0.5;
  }

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Projects a camera-frame point. Empty when the point is not in front.
inline std::optional<Vec2> project_camera(const CameraIntrinsics& k, const Vec3& p_cam) {
  if (!(p_cam.z() > 0.0)) return std::nullopt;
  return Vec2(k.fx * p_cam.x() / p_cam.z() + k.cx, k.fy * p_cam.y() / p_cam.z() + k.cy);
}

/// Projects a LiDAR-frame point through (cam_to_lidar)^-1 and K.
inline std::optional<Vec2> project(const CameraIntrinsics& k, const Pose& cam_to_lidar,
                                   const Vec3& p_lidar) {
  return project_camera(k, cam_to_lidar.inverse().apply(p_lidar));
}

struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;  // row-major, meters

  [[nodiscard]] double at(int u, int v) const {
    return depth[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
                 static_cast<std::size_t>(u)];
  }
};

/// Fixed depth hypotheses applied to every pixel.
struct DepthBins {
  std::vector<double> depths;

  /// Log-spaced ladder of `count` depths from near to far (inclusive).
  static DepthBins log_spaced(int count = 8, double near_m = 1.0, double far_m = 60.0) {
    if (count < 1 || !(near_m > 0.0) || !(far_m >= near_m)) {
      throw InvalidInput("DepthBins: need count >= 1 and 0 < near <= far");
    }
    DepthBins bins;
    bins.depths.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
      bins.depths.push_back(near_m * std::pow(far_m / near_m, f));
    }
    return bins;
  }
};

using DepthSource = std::variant<DepthMap, DepthBins>;

/// Image pixels lifted into the LiDAR frame. One entry per pixel (depth map)
/// or per pixel and depth bin (bins vary fastest).
struct PseudoPointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec2> pixels;
  std::vector<double> depths;

  [[nodiscard]] std::size_t size() const { return positions.size(); }
};

inline Vec3 lift_pixel(const CameraIntrinsics& k, const Pose& cam_to_lidar, double u, double v,
                       double depth) {
  return cam_to_lidar.apply(k.unproject(u, v) * depth);
}

inline PseudoPointCloud lift_pixels(const CameraIntrinsics& k, const Pose& cam_to_lidar,
                                    const DepthSource& source) {
  k.validate();
  PseudoPointCloud cloud;
  auto push = [&](int u, int v, double d) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw InvalidInput("lift_pixels: depth must be strictly positive and finite");
    }
    cloud.positions.push_back(lift_pixel(k, cam_to_lidar, u, v, d));
    cloud.pixels.emplace_back(u, v);
    cloud.depths.push_back(d);
  };

  if (const auto* map = std::get_if<DepthMap>(&source)) {
    if (map->width != k.width || map->height != k.height ||
        map->depth.size() != static_cast<std::size_t>(k.width) * static_cast<std::size_t>(k.height)) {
      throw InvalidInput("lift_pixels: depth map dimensions do not match intrinsics");
    }
    const auto n = map->depth.size();
    cloud.positions.reserve(n);
    cloud.pixels.reserve(n);
    cloud.depths.reserve(n);
    for (int v = 0; v < k.height; ++v)
      for (int u = 0; u < k.width; ++u) push(u, v, map->at(u, v));
  } else {
    const auto& bins = std::get<DepthBins>(source);
    if (bins.depths.empty()) throw InvalidInput("lift_pixels: empty depth bin set");
    for (int v = 0; v < k.height; ++v)
      for (int u = 0; u < k.width; ++u)
        for (double d : bins.depths) push(u, v, d);
  }
  return cloud;
}

}  // namespace m4d::geometry

#endif  // M4D_GEOMETRY_CAMERA_HPP
