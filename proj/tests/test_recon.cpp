// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "m4d/recon/pnp.hpp"
#include "m4d/recon/raycast.hpp"
#include "m4d/recon/scene.hpp"
#include "m4d/recon/voxel_grid.hpp"
#include "oracles.hpp"

namespace {

using namespace m4d;
using namespace m4d::recon;
using geometry::CameraIntrinsics;
using geometry::Pose;

ObjectBox box_at(std::int64_t id, const Vec3& half, int frame, const Pose& pose) {
  ObjectBox b;
  b.id = id;
  b.half_extents = half;
  b.poses[frame] = pose;
  return b;
}

CameraIntrinsics square_camera(int n, double f) {
  CameraIntrinsics k;
  k.fx = k.fy = f;
  k.cx = k.cy = (n - 1) / 2.0;
  k.width = k.height = n;
  return k;
}

// Camera at the origin looking down world +x (camera z), image x = -world y,
// image y = -world z.
Pose looking_along_x(const Vec3& eye = Vec3::Zero()) {
  Mat3 r;
  r.col(0) = Vec3(0, -1, 0);
  r.col(1) = Vec3(0, 0, -1);
  r.col(2) = Vec3(1, 0, 0);
  return Pose(r, eye);
}

TEST(SplitForeground, NoBoxesMeansBackground) {
  const std::vector<Vec3> scan{{1, 2, 3}, {4, 5, 6}};
  const Pose ego = Pose::from_translation(Vec3(10, 0, 0));
  const auto out = split_foreground(scan, ego, {}, 0);
  ASSERT_EQ(out.background.size(), 2u);
  EXPECT_EQ(out.background[0], Vec3(11, 2, 3));
  EXPECT_TRUE(out.objects.empty());
}

TEST(SplitForeground, BodyFrameIsWorldMinusPose) {
  const ObjectBox b = box_at(3, Vec3(1, 1, 1), 0, Pose::from_translation(Vec3(5, 5, 0)));
  const std::vector<Vec3> scan{{5.5, 4.5, 0.25}};
  const auto out = split_foreground(scan, Pose::identity(), std::span(&b, 1), 0);
  ASSERT_EQ(out.objects.at(3).size(), 1u);
  EXPECT_LE((out.objects.at(3)[0] - Vec3(0.5, -0.5, 0.25)).norm(), 1e-12);
  EXPECT_EQ(out.owner[0], 3);
}

TEST(SplitForeground, MatchesBruteForceContainment) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const std::vector<ObjectBox> boxes{box_at(1, Vec3(1.5, 1.0, 1.0), 0, Pose::from_yaw(0.4, Vec3(-0.5, 0, 0))),
                                     box_at(2, Vec3(1.0, 1.5, 1.0), 0, Pose::from_yaw(-0.3, Vec3(0.7, 0.2, 0)))};
  std::vector<Vec3> scan;
  for (int i = 0; i < 50; ++i) scan.emplace_back(u(rng), u(rng), u(rng) / 2.0);
  const Pose ego = Pose::from_yaw(0.1, Vec3(0.2, -0.1, 0));
  const auto out = split_foreground(scan, ego, boxes, 0);
  ASSERT_EQ(out.owner.size(), scan.size());
  std::size_t bg = 0;
  std::map<std::int64_t, std::size_t> fg;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const Vec3 w = ego.apply(scan[i]);
    std::int64_t expect = GridTag::kBackground;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : boxes) {
      const Vec3 body = b.poses.at(0).inverse().apply(w);
      const bool inside = std::abs(body.x()) <= b.half_extents.x() && std::abs(body.y()) <= b.half_extents.y() &&
                          std::abs(body.z()) <= b.half_extents.z();
      const double d = (w - b.poses.at(0).translation()).norm();
      if (inside && d < best) {
        best = d;
        expect = b.id;
      }
    }
    EXPECT_EQ(out.owner[i], expect) << "point " << i;
    if (expect == GridTag::kBackground) {
      EXPECT_LE((out.background[bg++] - w).norm(), 1e-12);
    } else {
      const Vec3 body = boxes[static_cast<std::size_t>(expect - 1)].poses.at(0).inverse().apply(w);
      EXPECT_LE((out.objects.at(expect)[fg[expect]++] - body).norm(), 1e-12);
    }
  }
  EXPECT_EQ(bg + fg[1] + fg[2], scan.size());
}

TEST(SplitForeground, MissingPoseRejected) {
  const ObjectBox b = box_at(1, Vec3::Ones(), 0, Pose::identity());
  const std::vector<Vec3> scan{{0, 0, 0}};
  EXPECT_THROW(split_foreground(scan, Pose::identity(), std::span(&b, 1), 5), InvalidInput);
}

TEST(VoxelGrid, FloorKeyAndWeight) {
  SparseVoxelGrid g(0.1);
  const std::vector<Vec3> p{{0.05, 0.05, 0.05}};
  g.integrate(p);
  EXPECT_EQ(g.size(), 1u);
  EXPECT_EQ(g.weight({0, 0, 0}), 1u);
  g.integrate(p);
  EXPECT_EQ(g.size(), 1u);
  EXPECT_EQ(g.weight({0, 0, 0}), 2u);
  const std::vector<Vec3> neg{{-0.01, -0.15, 0.0}};
  g.integrate(neg);
  EXPECT_EQ(g.weight({-1, -2, 0}), 1u);
}

TEST(VoxelGrid, MatchesFloorDivision) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 1000; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  SparseVoxelGrid g(0.25);
  g.integrate(pts);
  std::map<std::tuple<long, long, long>, unsigned> ref;
  for (const auto& p : pts) ++ref[{std::lround(std::floor(p.x() / 0.25)), std::lround(std::floor(p.y() / 0.25)),
                                   std::lround(std::floor(p.z() / 0.25))}];
  ASSERT_EQ(g.size(), ref.size());
  for (const auto& [k, w] : ref)
    EXPECT_EQ(g.weight({static_cast<int>(std::get<0>(k)), static_cast<int>(std::get<1>(k)),
                        static_cast<int>(std::get<2>(k))}),
              w);

  std::shuffle(pts.begin(), pts.end(), rng);
  SparseVoxelGrid h(0.25);
  h.integrate(pts);
  EXPECT_EQ(g, h);
}

TEST(VoxelGrid, RejectsNonFiniteBatch) {
  SparseVoxelGrid g(0.1);
  const std::vector<Vec3> pts{{0, 0, 0}, {std::nan(""), 0, 0}};
  EXPECT_THROW(g.integrate(pts), InvalidInput);
  EXPECT_TRUE(g.empty());
  EXPECT_THROW(SparseVoxelGrid(0.0), InvalidInput);
}

TEST(Reconstruction, ForegroundKeysStayRigid) {
  // A 0.4 m cube moving 0.3 m per frame yields the same body-frame keys
  // whichever frame is integrated.
  std::vector<Vec3> body;
  for (int x = -2; x < 2; ++x)
    for (int y = -2; y < 2; ++y)
      for (int z = -2; z < 2; ++z) body.emplace_back((x + 0.5) * 0.1, (y + 0.5) * 0.1, (z + 0.5) * 0.1);
  std::set<VoxelKey> first;
  for (int f = 0; f < 5; ++f) {
    const Pose pose = Pose::from_yaw(0.2 * f, Vec3(3 + 0.3 * f, 1, 0));
    const ObjectBox b = box_at(9, Vec3(0.25, 0.25, 0.25), f, pose);
    std::vector<Vec3> scan;
    for (const auto& p : body) scan.push_back(pose.apply(p));
    Reconstruction r(0.1);
    r.integrate_frame(scan, Pose::identity(), std::span(&b, 1), f);
    std::set<VoxelKey> keys;
    for (const auto& [k, w] : r.objects.at(9).cells()) keys.insert(k);
    if (f == 0) first = keys;
    EXPECT_EQ(keys, first);
    EXPECT_TRUE(r.background.empty());
  }
  EXPECT_EQ(first.size(), 64u);
}

TEST(Raycast, PrincipalRayHitsVoxelAhead) {
  SparseVoxelGrid g(0.1);
  g.add(g.key_of(Vec3(5.05, 0.05, 0.05)), 1);
  RaycastScene scene;
  scene.grids.push_back({&g, Pose::identity()});
  const auto k = square_camera(5, 50.0);
  const auto slice = raycast_table(scene, looking_along_x(Vec3(0, 0.05, 0.05)), k, 0, 0, 80.0);
  ASSERT_TRUE(slice.at(2, 2).has_value());
  EXPECT_EQ(slice.at(2, 2)->voxel.key, (VoxelKey{50, 0, 0}));
  EXPECT_NEAR(slice.at(2, 2)->distance, 5.0, 1e-9);
  EXPECT_EQ(slice.hit_count(), 1u);
}

TEST(Raycast, NothingBehindTheCamera) {
  SparseVoxelGrid g(0.1);
  g.add(g.key_of(Vec3(-5.05, 0.05, 0.05)), 1);
  RaycastScene scene;
  scene.grids.push_back({&g, Pose::identity()});
  const auto slice = raycast_table(scene, looking_along_x(Vec3(0, 0.05, 0.05)), square_camera(9, 5.0), 0, 0, 80.0);
  EXPECT_EQ(slice.hit_count(), 0u);
}

TEST(Raycast, RangeCutoff) {
  SparseVoxelGrid g(0.1);
  g.add(g.key_of(Vec3(5.05, 0.05, 0.05)), 1);
  RaycastScene scene;
  scene.grids.push_back({&g, Pose::identity()});
  const auto slice = raycast_table(scene, looking_along_x(Vec3(0, 0.05, 0.05)), square_camera(5, 50.0), 0, 0, 4.0);
  EXPECT_EQ(slice.hit_count(), 0u);
}

TEST(Raycast, ThreeScatteredVoxelsMatchFineSampler) {
  SparseVoxelGrid g(0.1);
  g.add({30, 2, -1}, 1);
  g.add({42, -5, 3}, 1);
  g.add({25, 0, 0}, 1);
  RaycastScene scene;
  scene.grids.push_back({&g, Pose::identity()});
  const auto k = square_camera(16, 30.0);
  const Pose cam = looking_along_x(Vec3(0, 0.013, 0.021));
  const auto slice = raycast_table(scene, cam, k, 0, 0, 80.0);
  const std::vector<oracle::SampledGrid> grids{{&g, Pose::identity()}};
  std::size_t hits = 0;
  for (int v = 0; v < 16; ++v) {
    for (int u = 0; u < 16; ++u) {
      const auto ref = oracle::fine_step_cast(grids, cam.translation(), pixel_ray(k, cam, u, v), 0.01, 80.0);
      const auto& got = slice.at(u, v);
      ASSERT_EQ(ref.has_value(), got.has_value()) << u << "," << v;
      if (ref) {
        EXPECT_EQ(ref->key, got->voxel.key);
        ++hits;
      }
    }
  }
  EXPECT_GT(hits, 0u);
}

// Exact oracle: the nearest positive slab entry over every occupied voxel of
// every grid, excluding a voxel that contains the origin.
std::optional<double> exhaustive_entry(const oracle::RandomRayScene& s, const Vec3& o, const Vec3& d) {
  std::optional<double> best;
  const std::pair<const SparseVoxelGrid*, Pose> grids[] = {{&s.background, Pose::identity()},
                                                           {&s.object, s.object_pose}};
  for (const auto& [g, pose] : grids) {
    const Pose inv = pose.inverse();
    const Vec3 og = inv.apply(o);
    const Vec3 dg = inv.rotate(d);
    const double vs = g->voxel_size();
    for (const auto& [key, w] : g->cells()) {
      const Vec3 lo(key.x * vs, key.y * vs, key.z * vs);
      double t0 = -std::numeric_limits<double>::infinity();
      double t1 = std::numeric_limits<double>::infinity();
      for (int a = 0; a < 3; ++a) {
        double ta = (lo[a] - og[a]) / dg[a];
        double tb = (lo[a] + vs - og[a]) / dg[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
      }
      if (t0 > t1 || t0 <= 0.0) continue;
      if (!best || t0 < *best) best = t0;
    }
  }
  return best;
}

TEST(Raycast, NoCloserOccupiedVoxelExhaustive) {
  std::size_t hits = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto s = oracle::random_ray_scene(seed, 0.02);
    RaycastScene scene;
    scene.grids.push_back({&s.background, Pose::identity()});
    scene.grids.push_back({&s.object, s.object_pose});
    const auto slice = raycast_table(scene, s.cam_to_world, s.k, 0, 0, 100.0);
    for (int v = 0; v < s.k.height; ++v) {
      for (int u = 0; u < s.k.width; ++u) {
        const Vec3 d = pixel_ray(s.k, s.cam_to_world, u, v);
        const auto ref = exhaustive_entry(s, s.cam_to_world.translation(), d);
        const auto& got = slice.at(u, v);
        ASSERT_EQ(ref.has_value(), got.has_value()) << "seed " << seed << " pixel " << u << "," << v;
        if (!ref) continue;
        ++hits;
        EXPECT_NEAR(*ref, got->distance, 1e-9);
        const auto& g = got->voxel.grid.is_background() ? s.background : s.object;
        EXPECT_TRUE(g.occupied(got->voxel.key));
      }
    }
  }
  EXPECT_GT(hits, 100u);
}

TEST(Raycast, MovedForegroundHitTransformsBack) {
  Reconstruction r(0.1);
  SparseVoxelGrid obj(0.1, GridTag::object(5));
  for (int y = -3; y < 3; ++y)
    for (int z = -3; z < 3; ++z) obj.add({0, y, z}, 1);
  r.objects.emplace(5, obj);
  ObjectBox b = box_at(5, Vec3(0.1, 0.3, 0.3), 0, Pose::from_yaw(0.3, Vec3(6, 0.2, 0.1)));
  b.poses[1] = Pose::from_yaw(-0.2, Vec3(8, -0.4, 0.2));
  r.boxes.emplace(5, b);
  const auto k = square_camera(24, 40.0);
  const Pose cam = looking_along_x();
  for (int f = 0; f < 2; ++f) {
    const auto slice = raycast_table(r, cam, k, 0, f, 80.0);
    ASSERT_GT(slice.hit_count(), 0u);
    for (int v = 0; v < k.height; ++v)
      for (int u = 0; u < k.width; ++u) {
        const auto& h = slice.at(u, v);
        if (!h) continue;
        EXPECT_EQ(h->voxel.grid.object_id, 5);
        EXPECT_TRUE(obj.occupied(h->voxel.key));
        const Vec3 hit_point = cam.translation() + pixel_ray(k, cam, u, v) * h->distance;
        const Vec3 center = r.world_center(h->voxel, f);
        EXPECT_LE((hit_point - center).norm(), 0.1 * std::sqrt(3.0));
      }
  }
  EXPECT_THROW(raycast_table(r, cam, k, 0, 2, 80.0), InvalidInput);
  EXPECT_EQ(raycast_table(r, cam, k, 0, 2, 80.0, true).hit_count(), 0u);
}

TEST(Raycast, ForegroundWinsExactTie) {
  SparseVoxelGrid bg(0.1);
  SparseVoxelGrid fg(0.1, GridTag::object(2));
  bg.add({50, 0, 0}, 1);
  fg.add({50, 0, 0}, 1);
  RaycastScene scene;
  scene.grids.push_back({&bg, Pose::identity()});
  scene.grids.push_back({&fg, Pose::identity()});
  const auto hit = cast_ray(scene, Vec3(0, 0.05, 0.05), Vec3(1, 0, 0), 80.0);
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->voxel.grid.object_id, 2);
}

std::vector<Correspondence> synthesize(const Pose& w2c, const CameraIntrinsics& k, int n, double noise_px,
                                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> depth(4.0, 12.0);
  std::normal_distribution<double> noise(0.0, noise_px);
  std::vector<Correspondence> out;
  const Pose c2w = w2c.inverse();
  while (static_cast<int>(out.size()) < n) {
    const Vec3 pc(u(rng), u(rng), depth(rng));
    const Vec2 px(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
    if (!k.contains(px.x(), px.y())) continue;
    out.push_back({c2w.apply(pc), px + (noise_px > 0 ? Vec2(noise(rng), noise(rng)) : Vec2::Zero())});
  }
  return out;
}

TEST(Pnp, NoiselessRecovery) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto k = square_camera(640, 500.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose truth = Pose::from_axis_angle(Vec3(n(rng), n(rng), n(rng)) * 0.5, Vec3(n(rng), n(rng), n(rng)));
    const auto corr = synthesize(truth, k, 20, 0.0, rng);
    const auto r = solve_pnp(corr, k);
    EXPECT_LE((r.world_to_camera.rotation() - truth.rotation()).norm(), 1e-6);
    EXPECT_LE((r.world_to_camera.translation() - truth.translation()).norm(), 1e-6);
    EXPECT_LE(r.mean_reprojection_error, 1e-6);
  }
}

TEST(Pnp, IdentityPose) {
  std::mt19937_64 rng(22);
  const auto k = square_camera(320, 300.0);
  const auto corr = synthesize(Pose::identity(), k, 12, 0.0, rng);
  const auto r = solve_pnp(corr, k);
  EXPECT_LE((r.world_to_camera.matrix() - Mat4::Identity()).norm(), 1e-6);
}

TEST(Pnp, HalfPixelNoise) {
  const auto k = square_camera(640, 500.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const Pose truth = Pose::from_axis_angle(Vec3(n(rng), n(rng), n(rng)) * 0.5, Vec3(n(rng), n(rng), n(rng)));
    const auto corr = synthesize(truth, k, 50, 0.5, rng);
    EXPECT_LE(solve_pnp(corr, k).mean_reprojection_error, 1.0);
  }
}

TEST(Pnp, DegenerateInputsRejected) {
  std::mt19937_64 rng(23);
  const auto k = square_camera(320, 300.0);
  auto corr = synthesize(Pose::identity(), k, 5, 0.0, rng);
  EXPECT_THROW(solve_pnp(corr, k), DegenerateConfiguration);
  std::vector<Correspondence> line;
  for (int i = 0; i < 10; ++i) {
    const Vec3 p(0.1 * i, 0.05 * i, 5.0 + 0.2 * i);
    line.push_back({p, Vec2(k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy)});
  }
  EXPECT_THROW(solve_pnp(line, k), DegenerateConfiguration);
}

}  // namespace
