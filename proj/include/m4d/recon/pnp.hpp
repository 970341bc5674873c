// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Camera pose from 3D-2D correspondences: normalized DLT for the initial
// estimate, then Gauss-Newton on SE(3) minimizing pixel reprojection error.

#ifndef M4D_RECON_PNP_HPP
#define M4D_RECON_PNP_HPP

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "m4d/core/types.hpp"
#include "m4d/geometry/camera.hpp"
#include "m4d/geometry/pose.hpp"

namespace m4d::recon {

using geometry::CameraIntrinsics;
using geometry::Pose;

struct Correspondence {
  Vec3 world;
  Vec2 pixel;
};

/// Thrown when the correspondences cannot determine a pose.
class DegenerateConfiguration : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

struct PnpOptions {
  int max_iterations = 50;
  double step_tolerance = 1e-13;
  /// Smallest admissible ratio sigma_11 / sigma_1 of the DLT system.
  double rank_tolerance = 1e-10;
};

struct PnpResult {
  Pose world_to_camera;
  double mean_reprojection_error = 0.0;  // pixels
  int iterations = 0;
};

inline double mean_reprojection_error(std::span<const Correspondence> corr, const CameraIntrinsics& k,
                                      const Pose& world_to_camera) {
  if (corr.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : corr) {
    const Vec3 pc = world_to_camera.apply(c.world);
    const Vec2 px(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
    sum += (px - c.pixel).norm();
  }
  return sum / static_cast<double>(corr.size());
}

namespace detail {

inline Pose dlt_pose(std::span<const Correspondence> corr, const CameraIntrinsics& k, const PnpOptions& opt) {
  const auto n = static_cast<Eigen::Index>(corr.size());
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : corr) centroid += c.world;
  centroid /= static_cast<double>(n);
  double spread = 0.0;
  for (const auto& c : corr) spread += (c.world - centroid).norm();
  spread /= static_cast<double>(n);
  if (!(spread > 0.0)) throw DegenerateConfiguration("solve_pnp: all 3D points coincide");
  const double scale = std::sqrt(3.0) / spread;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = corr[static_cast<std::size_t>(i)];
    const Vec3 xn = (c.world - centroid) * scale;
    const Eigen::Vector4d xh(xn.x(), xn.y(), xn.z(), 1.0);
    const double x = (c.pixel.x() - k.cx) / k.fx;
    const double y = (c.pixel.y() - k.cy) / k.fy;
    a.block<1, 4>(2 * i, 0) = xh.transpose();
    a.block<1, 4>(2 * i, 8) = -x * xh.transpose();
    a.block<1, 4>(2 * i + 1, 4) = xh.transpose();
    a.block<1, 4>(2 * i + 1, 8) = -y * xh.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(10) / sv(0) < opt.rank_tolerance) {
    throw DegenerateConfiguration(
        "solve_pnp: DLT system is rank deficient (points coplanar or collinear); sigma11/sigma1 = " +
        std::to_string(sv(0) > 0.0 ? sv(10) / sv(0) : 0.0));
  }
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> proj;
  proj << p(0), p(1), p(2), p(3), p(4), p(5), p(6), p(7), p(8), p(9), p(10), p(11);

  // Undo the 3D normalization: X_n = scale * (X - centroid).
  Eigen::Matrix4d norm = Eigen::Matrix4d::Identity();
  norm.topLeftCorner<3, 3>() *= scale;
  norm.topRightCorner<3, 1>() = -scale * centroid;
  proj = proj * norm;

  Mat3 m = proj.leftCols<3>();
  if (m.determinant() < 0.0) {
    proj = -proj;
    m = -m;
  }
  Eigen::JacobiSVD<Mat3> msvd(m);
  const double lambda = msvd.singularValues().mean();
  const Mat3 r = geometry::nearest_rotation(m / lambda);
  const Vec3 t = proj.col(3) / lambda;
  return Pose::from_parts(r, t);
}

}  // namespace detail

/// Returns the world-to-camera pose. Requires >= 6 non-coplanar points.
inline PnpResult solve_pnp(std::span<const Correspondence> corr, const CameraIntrinsics& k,
                           const PnpOptions& opt = {}) {
  k.validate();
  if (corr.size() < 6) {
    throw DegenerateConfiguration("solve_pnp: need at least 6 correspondences, got " + std::to_string(corr.size()));
  }
  for (const auto& c : corr) {
    if (!c.world.allFinite() || !c.pixel.allFinite()) throw InvalidInput("solve_pnp: non-finite correspondence");
  }

  Pose pose = detail::dlt_pose(corr, k, opt);
  auto squared_error = [&](const Pose& p) {
    double sum = 0.0;
    for (const auto& c : corr) {
      const Vec3 pc = p.apply(c.world);
      sum += (Vec2(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy) - c.pixel).squaredNorm();
    }
    return sum;
  };
  double err = squared_error(pose);
  int it = 0;
  while (it < opt.max_iterations) {
    ++it;
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (const auto& c : corr) {
      const Vec3 pc = pose.apply(c.world);
      if (pc.z() <= 0.0) throw DegenerateConfiguration("solve_pnp: estimate places points behind the camera");
      const double iz = 1.0 / pc.z();
      const Vec2 r(k.fx * pc.x() * iz + k.cx - c.pixel.x(), k.fy * pc.y() * iz + k.cy - c.pixel.y());
      Eigen::Matrix<double, 2, 3> jp;
      jp << k.fx * iz, 0, -k.fx * pc.x() * iz * iz, 0, k.fy * iz, -k.fy * pc.y() * iz * iz;
      // d(pc)/d(dt, omega) for pc' = exp(omega) pc + dt.
      Eigen::Matrix<double, 3, 6> jx;
      jx.leftCols<3>() = Mat3::Identity();
      jx.rightCols<3>() << 0, pc.z(), -pc.y(), -pc.z(), 0, pc.x(), pc.y(), -pc.x(), 0;
      const Eigen::Matrix<double, 2, 6> j = jp * jx;
      h += j.transpose() * j;
      g += j.transpose() * r;
    }
    const Eigen::Matrix<double, 6, 1> delta = h.ldlt().solve(-g);
    if (!delta.allFinite()) throw DegenerateConfiguration("solve_pnp: singular normal equations");
    const Mat3 dr = geometry::so3_exp(delta.tail<3>());
    const Pose candidate = Pose::from_parts(dr * pose.rotation(), dr * pose.translation() + delta.head<3>());
    const double cand_err = squared_error(candidate);
    if (!(cand_err <= err)) break;
    pose = candidate;
    err = cand_err;
    if (delta.norm() < opt.step_tolerance) break;
  }
  return {Pose::from_parts(geometry::nearest_rotation(pose.rotation()), pose.translation()),
          mean_reprojection_error(corr, k, pose), it};
}

}  // namespace m4d::recon

#endif  // M4D_RECON_PNP_HPP
