// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <vector>

#include "m4d/geometry/camera.hpp"
#include "m4d/geometry/pose.hpp"
#include "m4d/geometry/posenc.hpp"

namespace {

using namespace m4d;
using namespace m4d::geometry;

Pose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const Vec3 aa(n(rng), n(rng), n(rng));
  return Pose::from_axis_angle(aa, Vec3(n(rng), n(rng), n(rng)) * 3.0);
}

CameraIntrinsics small_camera() {
  CameraIntrinsics k;
  k.fx = 120.0;
  k.fy = 110.0;
  k.cx = 31.5;
  k.cy = 23.5;
  k.width = 64;
  k.height = 48;
  return k;
}

TEST(Pose, IdentityLeavesPointsAlone) {
  const std::vector<Vec3> pts{{1, 2, 3}};
  const auto out = se3_apply(Pose::identity(), pts);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], Vec3(1, 2, 3));
}

TEST(Pose, QuarterYawMapsXToY) {
  const std::vector<Vec3> pts{{1, 0, 0}};
  const auto out = se3_apply(Pose::from_yaw(std::numbers::pi / 2), pts);
  EXPECT_NEAR((out[0] - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(Pose, MatchesHomogeneousMatrixProduct) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  const Pose p = random_pose(rng);
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  const auto out = se3_apply(p, pts);
  const Mat4 m = p.matrix();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::Vector4d h = m * pts[i].homogeneous();
    EXPECT_LE((out[i] - h.head<3>()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Pose, GroupLaws) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const Pose c = random_pose(rng);
    EXPECT_LE((((a * b) * c).matrix() - (a * (b * c)).matrix()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((a.inverse().inverse().matrix() - a.matrix()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(((a * a.inverse()).matrix() - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Pose, RejectsNonRotation) {
  Mat3 r = Mat3::Identity();
  r(0, 0) = 1.01;
  EXPECT_THROW(Pose(r, Vec3::Zero()), InvalidInput);
  Mat4 m = Mat4::Identity();
  m(3, 0) = 1.0;
  EXPECT_THROW(Pose::from_matrix(m), InvalidInput);
  EXPECT_THROW(Pose(-Mat3::Identity(), Vec3::Zero()), InvalidInput);
}

TEST(Pose, RowMajorRoundTrip) {
  std::mt19937_64 rng(5);
  const Pose p = random_pose(rng);
  EXPECT_EQ(Pose::from_row_major(p.to_row_major()), p);
}

TEST(LiftPixels, PrincipalPointRay) {
  CameraIntrinsics k = small_camera();
  EXPECT_LE((lift_pixel(k, Pose::identity(), k.cx, k.cy, 5.0) - Vec3(0, 0, 5)).norm(), 1e-12);
}

TEST(LiftPixels, ConstantDepthMatchesClosedForm) {
  CameraIntrinsics k;
  k.fx = 4.0;
  k.fy = 5.0;
  k.cx = 1.5;
  k.cy = 2.0;
  k.width = 4;
  k.height = 4;
  DepthMap map{4, 4, std::vector<double>(16, 2.0)};
  const auto cloud = lift_pixels(k, Pose::identity(), map);
  ASSERT_EQ(cloud.size(), 16u);
  std::size_t i = 0;
  for (int v = 0; v < 4; ++v) {
    for (int u = 0; u < 4; ++u, ++i) {
      // K^-1 [u d, v d, d] by hand.
      const Vec3 expect((u - 1.5) * 2.0 / 4.0, (v - 2.0) * 2.0 / 5.0, 2.0);
      EXPECT_LE((cloud.positions[i] - expect).norm(), 1e-12);
      EXPECT_EQ(cloud.pixels[i], Vec2(u, v));
      EXPECT_EQ(cloud.depths[i], 2.0);
    }
  }
}

TEST(LiftPixels, RoundTripWithinHalfPixel) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> depth(0.5, 80.0);
  const CameraIntrinsics k = small_camera();
  for (int trial = 0; trial < 5; ++trial) {
    const Pose ext = random_pose(rng);
    DepthMap map{k.width, k.height, {}};
    for (int i = 0; i < k.width * k.height; ++i) map.depth.push_back(depth(rng));
    const auto cloud = lift_pixels(k, ext, map);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      // Independent projection: K (R^T (x - t)).
      const Vec3 pc = ext.rotation().transpose() * (cloud.positions[i] - ext.translation());
      const Vec3 h = k.matrix() * pc;
      const Vec2 px(h.x() / h.z(), h.y() / h.z());
      EXPECT_LT((px - cloud.pixels[i]).norm(), 0.5);
      const auto via_api = project(k, ext, cloud.positions[i]);
      ASSERT_TRUE(via_api.has_value());
      EXPECT_LT((*via_api - cloud.pixels[i]).norm(), 0.5);
    }
  }
}

TEST(LiftPixels, DepthBinsVaryFastest) {
  CameraIntrinsics k = small_camera();
  k.width = 2;
  k.height = 2;
  k.cx = 0.5;
  k.cy = 0.5;
  const auto bins = DepthBins::log_spaced(8, 1.0, 60.0);
  ASSERT_EQ(bins.depths.size(), 8u);
  EXPECT_NEAR(bins.depths.front(), 1.0, 1e-12);
  EXPECT_NEAR(bins.depths.back(), 60.0, 1e-9);
  for (std::size_t i = 1; i < bins.depths.size(); ++i)
    EXPECT_NEAR(bins.depths[i] / bins.depths[i - 1], std::pow(60.0, 1.0 / 7.0), 1e-12);
  const auto cloud = lift_pixels(k, Pose::identity(), bins);
  ASSERT_EQ(cloud.size(), 32u);
  EXPECT_EQ(cloud.pixels[0], cloud.pixels[7]);
  EXPECT_NE(cloud.pixels[7], cloud.pixels[8]);
  EXPECT_EQ(cloud.depths[1], bins.depths[1]);
}

TEST(LiftPixels, RejectsBadDepthAndShape) {
  CameraIntrinsics k = small_camera();
  DepthMap map{k.width, k.height, std::vector<double>(static_cast<std::size_t>(k.width * k.height), 1.0)};
  map.depth[5] = 0.0;
  EXPECT_THROW(lift_pixels(k, Pose::identity(), map), InvalidInput);
  map.depth[5] = -1.0;
  EXPECT_THROW(lift_pixels(k, Pose::identity(), map), InvalidInput);
  DepthMap wrong{3, 3, std::vector<double>(9, 1.0)};
  EXPECT_THROW(lift_pixels(k, Pose::identity(), wrong), InvalidInput);
  EXPECT_THROW(DepthBins::log_spaced(4, 0.0, 10.0), InvalidInput);
}

TEST(Sinusoid, ZeroInputAlternatesZeroOne) {
  const auto pe = sinpe2d(0.0, 0.0, 16);
  ASSERT_EQ(pe.dim(), 16);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(pe.values[i], i % 2 == 0 ? 0.0 : 1.0);
  const auto pe3 = sinpe3d(0.0, 0.0, 0.0, 24);
  for (int i = 0; i < 24; ++i) EXPECT_EQ(pe3.values[i], i % 2 == 0 ? 0.0 : 1.0);
}

TEST(Sinusoid, Deterministic) {
  const auto a = sinpe2d(12.25, 77.5, 32);
  const auto b = sinpe2d(12.25, 77.5, 32);
  EXPECT_EQ(std::memcmp(a.values.data(), b.values.data(), sizeof(double) * 32), 0);
}

TEST(Sinusoid, PeriodicInFinestBand) {
  const SinusoidConfig cfg;
  const double period = band_wavelength(0, cfg.base_wavelength_px);
  const auto a = sinpe2d(3.0, 4.0, 16, cfg);
  const auto b = sinpe2d(3.0 + period, 4.0, 16, cfg);
  EXPECT_NEAR(a.values[0], b.values[0], 1e-12);
  EXPECT_NEAR(a.values[1], b.values[1], 1e-12);
  // v-block untouched.
  for (int i = 8; i < 16; ++i) EXPECT_EQ(a.values[i], b.values[i]);
}

TEST(Sinusoid, AxisPermutationPermutesBlocks) {
  const auto a = sinpe3d(1.5, -2.0, 0.25, 18);
  const auto b = sinpe3d(-2.0, 0.25, 1.5, 18);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(a.values[i], b.values[12 + i]);
    EXPECT_EQ(a.values[6 + i], b.values[i]);
    EXPECT_EQ(a.values[12 + i], b.values[6 + i]);
  }
}

TEST(Sinusoid, MatchesDirectTrigonometry) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  const int d = 36;
  const int bands = d / 6;
  for (int t = 0; t < 10; ++t) {
    const double p[3] = {u(rng), u(rng), u(rng)};
    const auto pe = sinpe3d(p[0], p[1], p[2], d);
    for (int a = 0; a < 3; ++a) {
      for (int k = 0; k < bands; ++k) {
        const double omega = 2.0 * std::numbers::pi / (2.0 * std::pow(2.0, k));
        EXPECT_NEAR(pe.values[a * 12 + 2 * k], std::sin(omega * p[a]), 1e-12);
        EXPECT_NEAR(pe.values[a * 12 + 2 * k + 1], std::cos(omega * p[a]), 1e-12);
      }
    }
    for (int i = 0; i < d; ++i) EXPECT_LE(std::abs(pe.values[i]), 1.0);
  }
}

TEST(Sinusoid, RejectsBadDimension) {
  EXPECT_THROW(sinpe2d(0, 0, 6), InvalidInput);
  EXPECT_THROW(sinpe2d(0, 0, 0), InvalidInput);
  EXPECT_THROW(sinpe3d(0, 0, 0, 8), InvalidInput);
}

TEST(Mlp, ZeroParamsEmbedToZero) {
  const auto params = MlpParams::zeros(12);
  const std::vector<Vec3> pts{{1, 2, 3}, {-4, 0, 9}};
  for (const auto& e : mlp_embed(pts, params)) EXPECT_EQ(e.values, Vector::Zero(12));
}

TEST(Mlp, SeededIsBitIdentical) {
  const auto a = MlpParams::default_for(24, 99);
  const auto b = MlpParams::default_for(24, 99);
  for (std::size_t i = 0; i < a.weights().size(); ++i) {
    EXPECT_EQ(a.weights()[i], b.weights()[i]);
    EXPECT_EQ(a.biases()[i], b.biases()[i]);
  }
  const Vec3 p(0.3, -1.7, 2.2);
  EXPECT_EQ(a.evaluate(p), b.evaluate(p));
  EXPECT_NE(MlpParams::default_for(24, 100).evaluate(p), a.evaluate(p));
}

TEST(Mlp, HandSetSingleLayer) {
  Matrix w(2, 3);
  w << 0.5, -1.0, 0.25, 2.0, 0.0, -0.5;
  Vector b(2);
  b << 0.1, -0.2;
  const MlpParams params({w}, {b});
  const Vec3 p(1.0, 2.0, -4.0);
  const auto out = params.evaluate(p);
  EXPECT_NEAR(out[0], std::tanh(0.5 - 2.0 - 1.0 + 0.1), 1e-15);
  EXPECT_NEAR(out[1], std::tanh(2.0 + 2.0 - 0.2), 1e-15);
}

TEST(Mlp, RejectsShapeMismatch) {
  EXPECT_THROW(MlpParams({Matrix::Zero(4, 2)}, {Vector::Zero(4)}), InvalidInput);
  EXPECT_THROW(MlpParams({Matrix::Zero(4, 3)}, {Vector::Zero(3)}), InvalidInput);
  EXPECT_THROW(MlpParams({Matrix::Zero(4, 3), Matrix::Zero(2, 5)}, {Vector::Zero(4), Vector::Zero(2)}), InvalidInput);
  const int bad[] = {3};
  EXPECT_THROW(MlpParams::seeded(bad, 1), InvalidInput);
}

TEST(Umpe, ZeroMlpLidarEqualsSinusoid) {
  UmpeParams params{24, {}, MlpParams::zeros(24)};
  const Vec3 p(3.0, -1.0, 0.5);
  EXPECT_EQ(umpe(EncodingSite::lidar(p), params).values, sinpe3d(p.x(), p.y(), p.z(), 24).values);
}

TEST(Umpe, SharedSpaceAcrossModalities) {
  const auto params = UmpeParams::seeded(48, 4);
  const Vec3 p(10.0, 2.0, -0.5);
  const auto img = EncodingSite::image(Vec2(40, 12), p);
  const auto lid = EncodingSite::lidar(p);
  EXPECT_EQ(mlp_part(img, params), mlp_part(lid, params));
  const auto a = umpe(img, params);
  const auto b = umpe(lid, params);
  EXPECT_LE((a.values - sinusoid_part(img, params) - mlp_part(img, params)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((b.values - sinusoid_part(lid, params) - mlp_part(lid, params)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Umpe, ShapeAndFiniteness) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int dim : {12, 48, 50}) {
    const auto params = UmpeParams::seeded(dim, 1);
    for (int t = 0; t < 20; ++t) {
      const Vec3 p(u(rng), u(rng), u(rng));
      const auto a = umpe(EncodingSite::lidar(p), params);
      const auto b = umpe(EncodingSite::image(Vec2(u(rng), u(rng)), p), params);
      EXPECT_EQ(a.dim(), dim);
      EXPECT_EQ(b.dim(), dim);
      EXPECT_TRUE(a.values.allFinite());
      EXPECT_TRUE(b.values.allFinite());
    }
  }
}

TEST(Umpe, ImageNeedsLiftedPosition) {
  const auto params = UmpeParams::seeded(12, 1);
  EncodingSite site;
  site.modality = Modality::kImage;
  site.pixel = Vec2(1, 1);
  EXPECT_THROW(umpe(site, params), InvalidInput);
}

}  // namespace
