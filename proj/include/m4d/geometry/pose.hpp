// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Rigid SE(3) transforms.

#ifndef M4D_GEOMETRY_POSE_HPP
#define M4D_GEOMETRY_POSE_HPP

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "m4d/core/types.hpp"

namespace m4d::geometry {

/**
 * @brief Rigid transform p' = R p + t.
 *
 * Construction validates orthonormality (|R^T R - I| and |det R - 1| below
 * 1e-9). Use Pose::from_rotation_unchecked only for rotations produced by
 * this module's own algebra.
 */
class Pose {
 public:
  static constexpr double kOrthoTolerance = 1e-9;

  Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  Pose(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {
    if (!is_rotation(rotation_) || !translation_.allFinite()) {
      throw InvalidInput("Pose: rotation is not orthonormal with det +1");
    }
  }

  static Pose identity() { return Pose(); }

  static Pose from_translation(const Vec3& t) { return Pose(Mat3::Identity(), t); }

  /// Rotation about +z (yaw), radians.
  static Pose from_yaw(double yaw, const Vec3& t = Vec3::Zero()) {
    return Pose(Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(), t);
  }

  static Pose from_axis_angle(const Vec3& axis_angle, const Vec3& t) {
    const double angle = axis_angle.norm();
    if (angle < 1e-300) return Pose(Mat3::Identity(), t);
    return Pose(Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix(), t);
  }

  /// Accepts a homogeneous 4x4 matrix; bottom row must be (0,0,0,1).
  static Pose from_matrix(const Mat4& m) {
    if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > kOrthoTolerance) {
      throw InvalidInput("Pose: homogeneous matrix bottom row must be [0 0 0 1]");
    }
    return Pose(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
  }

  /// Row-major 16-element form, as stored in manifests.
  static Pose from_row_major(const std::array<double, 16>& v) {
    Mat4 m;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = v[static_cast<std::size_t>(r * 4 + c)];
    return from_matrix(m);
  }

  [[nodiscard]] std::array<double, 16> to_row_major() const {
    const Mat4 m = matrix();
    std::array<double, 16> out{};
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) out[static_cast<std::size_t>(r * 4 + c)] = m(r, c);
    return out;
  }

  [[nodiscard]] const Mat3& rotation() const { return rotation_; }
  [[nodiscard]] const Vec3& translation() const { return translation_; }

  [[nodiscard]] Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  [[nodiscard]] Vec3 rotate(const Vec3& v) const { return rotation_ * v; }

  /// (this * other)(p) = this(other(p)).
  [[nodiscard]] Pose operator*(const Pose& other) const {
    return from_parts(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
  }

  [[nodiscard]] Pose inverse() const {
    const Mat3 rt = rotation_.transpose();
    return from_parts(rt, -(rt * translation_));
  }

  static bool is_rotation(const Mat3& r, double tol = kOrthoTolerance) {
    if (!r.allFinite()) return false;
    const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
  }

  /// Skips validation. The caller guarantees R is a rotation up to rounding.
  static Pose from_parts(const Mat3& r, const Vec3& t) {
    Pose p;
    p.rotation_ = r;
    p.translation_ = t;
    return p;
  }

  /// Exact, element-wise.
  friend bool operator==(const Pose& a, const Pose& b) {
    return a.rotation_ == b.rotation_ && a.translation_ == b.translation_;
  }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }
inline Pose invert(const Pose& p) { return p.inverse(); }

/// Applies the pose to every point, preserving order.
inline std::vector<Vec3> se3_apply(const Pose& pose, std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(pose.apply(p));
  return out;
}

/// Largest absolute entry of the difference of the two homogeneous matrices.
inline double pose_distance(const Pose& a, const Pose& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

/// Projects a near-rotation onto SO(3) via SVD.
inline Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// Exponential map of so(3) (Rodrigues).
inline Mat3 so3_exp(const Vec3& omega) {
  const double angle = omega.norm();
  if (angle < 1e-12) {
    Mat3 s;
    s << 0, -omega.z(), omega.y(), omega.z(), 0, -omega.x(), -omega.y(), omega.x(), 0;
    return nearest_rotation(Mat3::Identity() + s);
  }
  return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}

}  // namespace m4d::geometry

#endif  // M4D_GEOMETRY_POSE_HPP
