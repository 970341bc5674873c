// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic test scene: a ground plane, three static panels and one moving
// boxed panel, observed by two forward cameras from a vehicle driving along
// +x. Masks are exact: each pixel is labelled by the object owning the first
// voxel its ray hits.

#ifndef M4D_ENGINE_SYNTHETIC_HPP
#define M4D_ENGINE_SYNTHETIC_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "m4d/engine/pipeline.hpp"

namespace m4d::engine {

struct SyntheticOptions {
  int frames = 20;
  int width = 128;
  int height = 96;
  double focal = 100.0;
  double voxel_size = 0.1;
  double ego_speed = 0.25;     // m per frame along +x
  double object_speed = 0.1;   // moving panel, m per frame along +x
  double noise_fraction = 0.0;  // spurious pixels per mask, as a fraction of its size
  double noise_min_distance = 3.0;
  std::uint64_t seed = 7;
};

struct SyntheticScene {
  SequenceData data;
  /// Ground-truth voxels per object id.
  std::map<std::int64_t, std::set<VoxelId>> object_voxels;
  /// Ground-truth scan indices per object and frame.
  std::map<std::int64_t, std::map<int, std::vector<std::uint32_t>>> object_points;
  /// Voxels reached only through injected noise pixels, per object.
  std::map<std::int64_t, std::set<VoxelId>> injected;
  std::size_t injected_pixels = 0;

  /// Writes manifest.json, scans/ and masklets/ under `dir`.
  void write(const std::filesystem::path& dir) const {
    io::SequenceManifest m = data.manifest;
    for (int f = 0; f < m.frame_count; ++f)
      io::write_scan(dir / m.scans[static_cast<std::size_t>(f)], data.scans[static_cast<std::size_t>(f)]);
    std::map<int, std::vector<fusion::Masklet2D>> by_cam;
    for (const auto& mk : data.masklets) by_cam[mk.camera].push_back(mk);
    for (const auto& [cam, ms] : by_cam)
      io::write_file(dir / ("masklets/cam" + std::to_string(cam) + ".json"), io::masklets2d_to_json(ms).dump() + "\n");
    io::write_manifest(dir / "manifest.json", m);
  }
};

namespace detail {

struct Panel {
  std::int64_t id;
  int x;
  int y0, y1;  // inclusive key ranges
  int z0, z1;
};

inline std::vector<VoxelKey> panel_keys(const Panel& p) {
  std::vector<VoxelKey> out;
  for (int y = p.y0; y <= p.y1; ++y)
    for (int z = p.z0; z <= p.z1; ++z) out.push_back({p.x, y, z});
  return out;
}

inline geometry::Pose forward_camera(double yaw_deg, const Vec3& position) {
  Mat3 base;
  // camera x -> -y, camera y -> -z, camera z -> +x
  base << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  const double a = yaw_deg * std::numbers::pi / 180.0;
  const Mat3 yaw = Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
  return geometry::Pose(yaw * base, position);
}

inline Vec3 rounded(const Vec3& p) {
  return {static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z())};
}

}  // namespace detail

inline constexpr std::int64_t kMovingObject = 4;

/// Masklet id for (camera, object): 10 * camera + object.
inline std::int64_t synthetic_masklet_id(int camera, std::int64_t object) { return 10 * camera + object; }

inline SyntheticScene make_synthetic_scene(const SyntheticOptions& opt = {}) {
  if (opt.frames < 1) throw InvalidInput("synthetic scene: frames must be >= 1");
  const double s = opt.voxel_size;
  SyntheticScene scene;
  auto& m = scene.data.manifest;
  m.sequence_id = "synthetic";
  m.frame_count = opt.frames;

  // Scene layout in voxel keys (0.1 m default).
  std::vector<VoxelKey> ground;
  for (int x = -20; x < 250; ++x)
    for (int y = -60; y < 60; ++y) ground.push_back({x, y, 0});
  const std::vector<detail::Panel> panels = {
      {1, 90, -25, -16, 5, 14},
      {2, 110, 15, 24, 5, 14},
      {3, 140, -5, 4, 5, 14},
  };
  std::vector<VoxelKey> mover_body;  // body frame, centered on the origin
  for (int y = -5; y <= 4; ++y)
    for (int z = -4; z <= 3; ++z) mover_body.push_back({0, y, z});
  const Vec3 mover_half(0.2, 0.55, 0.45);
  auto mover_pose = [&](int f) { return geometry::Pose::from_translation(Vec3(7.0 + opt.object_speed * f, 2.5, 1.0)); };

  for (const auto& p : panels)
    for (const auto& k : detail::panel_keys(p)) scene.object_voxels[p.id].insert({GridTag::background(), k});
  for (const auto& k : mover_body) scene.object_voxels[kMovingObject].insert({GridTag::object(kMovingObject), k});

  const double px = (opt.width - 1) / 2.0;
  const double py = (opt.height - 1) / 2.0;
  for (int c = 0; c < 2; ++c) {
    io::CameraSpec cam;
    cam.id = c;
    cam.intrinsics = {opt.focal, opt.focal, px, py, opt.width, opt.height};
    cam.extrinsic = detail::forward_camera(c == 0 ? 5.0 : -5.0, Vec3(0.0, c == 0 ? 0.3 : -0.3, 1.0));
    m.cameras.push_back(cam);
  }

  auto center = [s](const VoxelKey& k) { return Vec3((k.x + 0.5) * s, (k.y + 0.5) * s, (k.z + 0.5) * s); };
  for (int f = 0; f < opt.frames; ++f) {
    const auto ego = geometry::Pose::from_translation(Vec3(opt.ego_speed * f, 0.0, 0.0));
    m.ego_poses.push_back(ego);
    char name[32];
    std::snprintf(name, sizeof name, "scans/%06d.bin", f);
    m.scans.emplace_back(name);
    m.boxes.push_back({io::BoxRecord{kMovingObject, mover_half, mover_pose(f)}});

    const auto to_ego = ego.inverse();
    std::vector<Vec3> scan;
    scan.reserve(ground.size() + 400);
    for (const auto& k : ground) scan.push_back(detail::rounded(to_ego.apply(center(k))));
    for (const auto& p : panels) {
      auto& idx = scene.object_points[p.id][f];
      for (const auto& k : detail::panel_keys(p)) {
        idx.push_back(static_cast<std::uint32_t>(scan.size()));
        scan.push_back(detail::rounded(to_ego.apply(center(k))));
      }
    }
    auto& idx = scene.object_points[kMovingObject][f];
    const auto pose = mover_pose(f);
    for (const auto& k : mover_body) {
      idx.push_back(static_cast<std::uint32_t>(scan.size()));
      scan.push_back(detail::rounded(to_ego.apply(pose.apply(center(k)))));
    }
    scene.data.scans.push_back(std::move(scan));
  }

  io::ReconConfig rcfg;
  rcfg.voxel_size = s;
  const auto rc = reconstruct(m, scene.data.scans, rcfg);
  const auto table = raycast_all(rc, m, rcfg);

  std::map<VoxelId, std::int64_t> owner;
  for (const auto& [id, vs] : scene.object_voxels)
    for (const auto& v : vs) owner[v] = id;

  std::map<std::pair<int, std::int64_t>, std::set<VoxelId>> seen;
  for (const auto& cam : m.cameras) {
    for (const auto& [id, vs] : scene.object_voxels) {
      fusion::Masklet2D mk;
      mk.id = synthetic_masklet_id(cam.id, id);
      mk.object_id = id;
      mk.camera = cam.id;
      mk.width = opt.width;
      mk.height = opt.height;
      for (int f = 0; f < opt.frames; ++f) {
        const auto& slice = table.at({cam.id, f});
        BinaryMask mask(opt.width, opt.height);
        for (std::size_t i = 0; i < slice.hits.size(); ++i) {
          const auto& h = slice.hits[i];
          if (!h) continue;
          const auto it = owner.find(h->voxel);
          if (it != owner.end() && it->second == id) {
            mask.bits[i] = 1;
            seen[{cam.id, id}].insert(h->voxel);
          }
        }
        if (!mask.any()) continue;
        if (opt.noise_fraction > 0.0) {
          // Spurious pixels whose voxel is far from every voxel of the object.
          std::vector<Vec3> obj;
          for (const auto& v : vs) obj.push_back(rc.world_center(v, f));
          std::map<VoxelId, bool> far;
          std::vector<std::size_t> candidates;
          for (std::size_t i = 0; i < slice.hits.size(); ++i) {
            const auto& h = slice.hits[i];
            if (!h || mask.bits[i] || owner.count(h->voxel)) continue;
            auto [it, fresh] = far.try_emplace(h->voxel, true);
            if (fresh) {
              const Vec3 c = rc.world_center(h->voxel, f);
              for (const auto& o : obj)
                if ((o - c).norm() <= opt.noise_min_distance) {
                  it->second = false;
                  break;
                }
            }
            if (it->second) candidates.push_back(i);
          }
          const auto want = static_cast<std::size_t>(std::ceil(opt.noise_fraction * static_cast<double>(mask.count())));
          std::mt19937_64 rng(m4d::detail::hash_mix(m4d::detail::hash_mix(opt.seed, static_cast<std::uint64_t>(mk.id)),
                                                    static_cast<std::uint64_t>(f)));
          std::shuffle(candidates.begin(), candidates.end(), rng);
          for (std::size_t k = 0; k < want && k < candidates.size(); ++k) {
            mask.bits[candidates[k]] = 1;
            scene.injected[id].insert(slice.hits[candidates[k]]->voxel);
            ++scene.injected_pixels;
          }
        }
        mk.set_mask(f, mask);
      }
      scene.data.masklets.push_back(std::move(mk));
    }
  }
  std::sort(scene.data.masklets.begin(), scene.data.masklets.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (int c = 0; c < 2; ++c)
    m.masklets.push_back("masklets/cam" + std::to_string(c) + ".json");

  for (const auto& cam : m.cameras)
    for (const auto& [id, vs] : scene.object_voxels)
      if (seen[{cam.id, id}].size() != vs.size())
        throw std::logic_error("synthetic scene: camera " + std::to_string(cam.id) + " sees " +
                               std::to_string(seen[{cam.id, id}].size()) + " of " + std::to_string(vs.size()) +
                               " voxels of object " + std::to_string(id));
  return scene;
}

}  // namespace m4d::engine

#endif  // M4D_ENGINE_SYNTHETIC_HPP
