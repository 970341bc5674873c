// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats. Binary forms start with a 4-byte magic and a u32 version;
// all integers and floats are little-endian. Each has a JSON debug form.
//
//   scan  : u32 count, count x (f32 x, f32 y, f32 z)
//   M4VG  : voxel grid
//   M4RC  : reconstruction (grids + boxes)
//   M4PT  : pixel-voxel table
//   M4VM  : voxel masklets
//   M4M3  : LiDAR point masklets

#ifndef M4D_IO_FORMATS_HPP
#define M4D_IO_FORMATS_HPP

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "m4d/fusion/masklet.hpp"
#include "m4d/io/binary.hpp"
#include "m4d/io/rle.hpp"
#include "m4d/recon/raycast.hpp"
#include "m4d/recon/scene.hpp"

namespace m4d::io {

using nlohmann::json;

inline constexpr std::uint32_t kFormatVersion = 1;

// ---- scans -------------------------------------------------------------

inline std::string encode_scan(std::span<const Vec3> points) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(points.size()));
  for (const auto& p : points) {
    w.f32(static_cast<float>(p.x()));
    w.f32(static_cast<float>(p.y()));
    w.f32(static_cast<float>(p.z()));
  }
  return w.take();
}

inline std::vector<Vec3> decode_scan(std::string_view bytes, const std::string& what = "scan") {
  ByteReader r(bytes, what);
  const std::uint32_t n = r.u32();
  if (static_cast<std::uint64_t>(n) * 12 != r.remaining())
    throw FormatError(what + ": header says " + std::to_string(n) + " points but body holds " +
                      std::to_string(r.remaining()) + " bytes");
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const float x = r.f32();
    const float y = r.f32();
    const float z = r.f32();
    out.emplace_back(x, y, z);
  }
  return out;
}

inline std::vector<Vec3> read_scan(const std::filesystem::path& p) { return decode_scan(read_file(p), p.string()); }
inline void write_scan(const std::filesystem::path& p, std::span<const Vec3> points) {
  write_file(p, encode_scan(points));
}

// ---- voxel identities --------------------------------------------------

namespace detail {
inline void put_voxel(ByteWriter& w, const VoxelId& v) {
  w.i64(v.grid.object_id);
  w.i32(v.key.x);
  w.i32(v.key.y);
  w.i32(v.key.z);
}
inline VoxelId get_voxel(ByteReader& r) {
  VoxelId v;
  v.grid.object_id = r.i64();
  v.key.x = r.i32();
  v.key.y = r.i32();
  v.key.z = r.i32();
  return v;
}
inline json voxel_json(const VoxelId& v) { return json::array({v.grid.object_id, v.key.x, v.key.y, v.key.z}); }
inline void put_pose(ByteWriter& w, const geometry::Pose& p) {
  for (double x : p.to_row_major()) w.f64(x);
}
inline geometry::Pose get_pose(ByteReader& r) {
  std::array<double, 16> m{};
  for (auto& x : m) x = r.f64();
  return geometry::Pose::from_row_major(m);
}
}  // namespace detail

// ---- voxel grid --------------------------------------------------------

inline void put_grid(ByteWriter& w, const recon::SparseVoxelGrid& g) {
  w.raw("M4VG");
  w.u32(kFormatVersion);
  w.f64(g.voxel_size());
  w.i64(g.tag().object_id);
  const auto recs = g.sorted_records();
  w.u64(recs.size());
  for (const auto& [k, wt] : recs) {
    w.i32(k.x);
    w.i32(k.y);
    w.i32(k.z);
    w.u32(wt);
  }
}

inline recon::SparseVoxelGrid get_grid(ByteReader& r) {
  r.expect_magic("M4VG", kFormatVersion);
  const double s = r.f64();
  const std::int64_t tag = r.i64();
  recon::SparseVoxelGrid g(s, GridTag{tag});
  const auto n = r.count(16);
  for (std::uint64_t i = 0; i < n; ++i) {
    VoxelKey k;
    k.x = r.i32();
    k.y = r.i32();
    k.z = r.i32();
    g.add(k, r.u32());
  }
  return g;
}

inline std::string encode_grid(const recon::SparseVoxelGrid& g) {
  ByteWriter w;
  put_grid(w, g);
  return w.take();
}

inline recon::SparseVoxelGrid decode_grid(std::string_view bytes) {
  ByteReader r(bytes, "voxel grid");
  auto g = get_grid(r);
  r.finish();
  return g;
}

inline json grid_to_json(const recon::SparseVoxelGrid& g) {
  json cells = json::array();
  for (const auto& [k, wt] : g.sorted_records()) cells.push_back({k.x, k.y, k.z, wt});
  return {{"format", "m4d-voxel-grid"}, {"version", kFormatVersion}, {"voxel_size", g.voxel_size()},
          {"grid", g.tag().object_id}, {"cells", cells}};
}

// ---- reconstruction ----------------------------------------------------

inline std::string encode_reconstruction(const recon::Reconstruction& rc) {
  ByteWriter w;
  w.raw("M4RC");
  w.u32(kFormatVersion);
  w.f64(rc.voxel_size);
  put_grid(w, rc.background);
  w.u64(rc.objects.size());
  for (const auto& [id, g] : rc.objects) put_grid(w, g);
  w.u64(rc.boxes.size());
  for (const auto& [id, b] : rc.boxes) {
    w.i64(b.id);
    for (int a = 0; a < 3; ++a) w.f64(b.half_extents[a]);
    w.u64(b.poses.size());
    for (const auto& [f, p] : b.poses) {
      w.i32(f);
      detail::put_pose(w, p);
    }
  }
  return w.take();
}

inline recon::Reconstruction decode_reconstruction(std::string_view bytes) {
  ByteReader r(bytes, "reconstruction");
  r.expect_magic("M4RC", kFormatVersion);
  recon::Reconstruction rc(r.f64());
  rc.background = get_grid(r);
  const auto no = r.count(1);
  for (std::uint64_t i = 0; i < no; ++i) {
    auto g = get_grid(r);
    const auto id = g.tag().object_id;
    rc.objects.emplace(id, std::move(g));
  }
  const auto nb = r.count(1);
  for (std::uint64_t i = 0; i < nb; ++i) {
    recon::ObjectBox b;
    b.id = r.i64();
    for (int a = 0; a < 3; ++a) b.half_extents[a] = r.f64();
    const auto np = r.count(4 + 128);
    for (std::uint64_t j = 0; j < np; ++j) {
      const int f = r.i32();
      b.poses.emplace(f, detail::get_pose(r));
    }
    rc.boxes.emplace(b.id, std::move(b));
  }
  r.finish();
  return rc;
}

inline json reconstruction_to_json(const recon::Reconstruction& rc) {
  json objects = json::array();
  for (const auto& [id, g] : rc.objects) objects.push_back(grid_to_json(g));
  json boxes = json::array();
  for (const auto& [id, b] : rc.boxes) {
    json poses = json::object();
    for (const auto& [f, p] : b.poses) poses[std::to_string(f)] = p.to_row_major();
    boxes.push_back({{"id", id}, {"half_extents", {b.half_extents.x(), b.half_extents.y(), b.half_extents.z()}},
                     {"poses", poses}});
  }
  return {{"format", "m4d-reconstruction"}, {"version", kFormatVersion}, {"voxel_size", rc.voxel_size},
          {"background", grid_to_json(rc.background)}, {"objects", objects}, {"boxes", boxes}};
}

// ---- pixel-voxel table -------------------------------------------------

inline std::string encode_table(const recon::PixelVoxelTable& t) {
  ByteWriter w;
  w.raw("M4PT");
  w.u32(kFormatVersion);
  w.u64(t.size());
  for (const auto& [key, s] : t) {
    w.i32(s.camera);
    w.i32(s.frame);
    w.i32(s.width);
    w.i32(s.height);
    for (const auto& h : s.hits) {
      w.u8(h ? 1 : 0);
      if (!h) continue;
      detail::put_voxel(w, h->voxel);
      w.f64(h->distance);
    }
  }
  return w.take();
}

inline recon::PixelVoxelTable decode_table(std::string_view bytes) {
  ByteReader r(bytes, "pixel-voxel table");
  r.expect_magic("M4PT", kFormatVersion);
  recon::PixelVoxelTable t;
  const auto n = r.count(16);
  for (std::uint64_t i = 0; i < n; ++i) {
    recon::TableSlice s;
    s.camera = r.i32();
    s.frame = r.i32();
    s.width = r.i32();
    s.height = r.i32();
    if (s.width < 0 || s.height < 0) throw FormatError("pixel-voxel table: negative slice size");
    const auto pixels = static_cast<std::uint64_t>(s.width) * static_cast<std::uint64_t>(s.height);
    if (pixels > r.remaining()) throw FormatError("pixel-voxel table: slice larger than file");
    s.hits.resize(pixels);
    for (auto& h : s.hits) {
      const auto flag = r.u8();
      if (flag > 1) throw FormatError("pixel-voxel table: bad hit flag");
      if (!flag) continue;
      recon::PixelHit hit;
      hit.voxel = detail::get_voxel(r);
      hit.distance = r.f64();
      h = hit;
    }
    if (!t.emplace(std::pair{s.camera, s.frame}, s).second)
      throw FormatError("pixel-voxel table: duplicate slice");
  }
  r.finish();
  return t;
}

inline json table_to_json(const recon::PixelVoxelTable& t) {
  json slices = json::array();
  for (const auto& [key, s] : t) {
    json hits = json::array();
    for (std::size_t i = 0; i < s.hits.size(); ++i) {
      if (!s.hits[i]) continue;
      hits.push_back({{"pixel", i}, {"voxel", detail::voxel_json(s.hits[i]->voxel)}, {"distance", s.hits[i]->distance}});
    }
    slices.push_back({{"camera", s.camera}, {"frame", s.frame}, {"width", s.width}, {"height", s.height}, {"hits", hits}});
  }
  return {{"format", "m4d-pixel-voxel-table"}, {"version", kFormatVersion}, {"slices", slices}};
}

// ---- voxel masklets ----------------------------------------------------

inline std::string encode_voxel_masklets(std::span<const fusion::VoxelMasklet> ms) {
  ByteWriter w;
  w.raw("M4VM");
  w.u32(kFormatVersion);
  w.u64(ms.size());
  for (const auto& m : ms) {
    w.i64(m.id);
    w.u64(m.cameras.size());
    for (int c : m.cameras) w.i32(c);
    w.u64(m.voxels.size());
    for (const auto& [v, c] : m.voxels) {
      detail::put_voxel(w, v);
      w.u32(c.votes);
      w.u32(c.observations);
    }
  }
  return w.take();
}

inline std::vector<fusion::VoxelMasklet> decode_voxel_masklets(std::string_view bytes) {
  ByteReader r(bytes, "voxel masklets");
  r.expect_magic("M4VM", kFormatVersion);
  std::vector<fusion::VoxelMasklet> out;
  const auto n = r.count(24);
  for (std::uint64_t i = 0; i < n; ++i) {
    fusion::VoxelMasklet m;
    m.id = r.i64();
    const auto nc = r.count(4);
    for (std::uint64_t j = 0; j < nc; ++j) m.cameras.insert(r.i32());
    const auto nv = r.count(28);
    for (std::uint64_t j = 0; j < nv; ++j) {
      const VoxelId v = detail::get_voxel(r);
      fusion::VoteCount c;
      c.votes = r.u32();
      c.observations = r.u32();
      m.voxels.emplace(v, c);
    }
    out.push_back(std::move(m));
  }
  r.finish();
  return out;
}

inline json voxel_masklets_to_json(std::span<const fusion::VoxelMasklet> ms) {
  json arr = json::array();
  for (const auto& m : ms) {
    json vox = json::array();
    for (const auto& [v, c] : m.voxels) vox.push_back({{"voxel", detail::voxel_json(v)}, {"votes", c.votes},
                                                        {"observations", c.observations}});
    arr.push_back({{"id", m.id}, {"cameras", m.cameras}, {"voxels", vox}});
  }
  return {{"format", "m4d-voxel-masklets"}, {"version", kFormatVersion}, {"masklets", arr}};
}

// ---- LiDAR point masklets ----------------------------------------------

inline std::string encode_point_masklets(std::span<const fusion::Masklet3D> ms) {
  ByteWriter w;
  w.raw("M4M3");
  w.u32(kFormatVersion);
  w.u64(ms.size());
  for (const auto& m : ms) {
    w.i64(m.id);
    w.u64(m.frames.size());
    for (const auto& [f, idx] : m.frames) {
      w.i32(f);
      w.u64(idx.size());
      for (auto i : idx) w.u32(i);
    }
  }
  return w.take();
}

inline std::vector<fusion::Masklet3D> decode_point_masklets(std::string_view bytes) {
  ByteReader r(bytes, "point masklets");
  r.expect_magic("M4M3", kFormatVersion);
  std::vector<fusion::Masklet3D> out;
  const auto n = r.count(16);
  for (std::uint64_t i = 0; i < n; ++i) {
    fusion::Masklet3D m;
    m.id = r.i64();
    const auto nf = r.count(12);
    for (std::uint64_t j = 0; j < nf; ++j) {
      const int f = r.i32();
      const auto ni = r.count(4);
      std::vector<std::uint32_t> idx(ni);
      for (auto& x : idx) x = r.u32();
      m.frames.emplace(f, std::move(idx));
    }
    out.push_back(std::move(m));
  }
  r.finish();
  return out;
}

inline json point_masklets_to_json(std::span<const fusion::Masklet3D> ms) {
  json arr = json::array();
  for (const auto& m : ms) {
    json frames = json::array();
    for (const auto& [f, idx] : m.frames) frames.push_back({{"frame", f}, {"points", idx}});
    arr.push_back({{"id", m.id}, {"frames", frames}});
  }
  return {{"format", "m4d-point-masklets"}, {"version", kFormatVersion}, {"masklets", arr}};
}

// ---- 2D masklets (JSON with RLE) ----------------------------------------

inline json rle_to_json(const RleMask& r) { return {{"width", r.width}, {"height", r.height}, {"runs", r.runs}}; }

inline RleMask rle_from_json(const json& j) {
  RleMask r;
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  r.runs = j.at("runs").get<std::vector<std::uint32_t>>();
  (void)rle_decode(r);  // validates the run sum
  return r;
}

inline json masklet2d_to_json(const fusion::Masklet2D& m) {
  json frames = json::array();
  for (const auto& [f, r] : m.frames) frames.push_back({{"frame", f}, {"runs", r.runs}});
  return {{"id", m.id}, {"object_id", m.object_id}, {"camera", m.camera},
          {"width", m.width}, {"height", m.height}, {"frames", frames}};
}

inline fusion::Masklet2D masklet2d_from_json(const json& j) {
  fusion::Masklet2D m;
  m.id = j.at("id").get<std::int64_t>();
  m.object_id = j.at("object_id").get<std::int64_t>();
  m.camera = j.at("camera").get<int>();
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  for (const auto& fj : j.at("frames")) {
    RleMask r{m.width, m.height, fj.at("runs").get<std::vector<std::uint32_t>>()};
    (void)rle_decode(r);
    m.frames[fj.at("frame").get<int>()] = std::move(r);
  }
  return m;
}

inline json masklets2d_to_json(std::span<const fusion::Masklet2D> ms) {
  json arr = json::array();
  for (const auto& m : ms) arr.push_back(masklet2d_to_json(m));
  return {{"format", "m4d-masklets-2d"}, {"version", kFormatVersion}, {"masklets", arr}};
}

inline std::vector<fusion::Masklet2D> masklets2d_from_json(const json& j) {
  if (j.value("format", "") != "m4d-masklets-2d") throw FormatError("2D masklet file: wrong format tag");
  if (j.value("version", 0u) != kFormatVersion) throw FormatError("2D masklet file: unsupported version");
  std::vector<fusion::Masklet2D> out;
  for (const auto& mj : j.at("masklets")) out.push_back(masklet2d_from_json(mj));
  return out;
}

}  // namespace m4d::io

#endif  // M4D_IO_FORMATS_HPP
