// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Sequence manifest: the JSON entry point describing one recorded sequence.
//
//   {
//     "format": "m4d-manifest", "version": 1,
//     "sequence_id": "seq-000",
//     "frame_count": 2,
//     "ego_poses": [[16 row-major doubles], ...],          // ego -> world
//     "cameras": [{"id": 0,
//                  "intrinsics": {"fx":..,"fy":..,"cx":..,"cy":..,"width":..,"height":..},
//                  "extrinsic": [16 row-major doubles]}],   // camera -> ego (LiDAR)
//     "scans": ["scans/000000.bin", ...],                   // one per frame
//     "boxes": [[{"id": 7, "half_extents": [x,y,z], "pose": [16]}], ...],  // one list per frame
//     "masklets": ["masklets/cam0.json", ...]
//   }
//
// Relative paths resolve against the manifest's directory.

#ifndef M4D_IO_MANIFEST_HPP
#define M4D_IO_MANIFEST_HPP

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "m4d/fusion/masklet.hpp"
#include "m4d/geometry/camera.hpp"
#include "m4d/geometry/pose.hpp"
#include "m4d/io/binary.hpp"
#include "m4d/io/formats.hpp"
#include "m4d/recon/scene.hpp"

namespace m4d::io {

inline constexpr std::uint32_t kManifestVersion = 1;

struct CameraSpec {
  int id = 0;
  geometry::CameraIntrinsics intrinsics;
  geometry::Pose extrinsic;  // camera -> ego

  friend bool operator==(const CameraSpec&, const CameraSpec&) = default;
};

struct BoxRecord {
  std::int64_t id = 0;
  Vec3 half_extents = Vec3::Ones();
  geometry::Pose pose;  // body -> world

  friend bool operator==(const BoxRecord& a, const BoxRecord& b) {
    return a.id == b.id && a.half_extents == b.half_extents && a.pose == b.pose;
  }
};

struct SequenceManifest {
  std::string sequence_id;
  int frame_count = 0;
  std::vector<geometry::Pose> ego_poses;
  std::vector<CameraSpec> cameras;
  std::vector<std::string> scans;
  std::vector<std::vector<BoxRecord>> boxes;
  std::vector<std::string> masklets;
  std::filesystem::path base_dir;  // not serialized

  [[nodiscard]] std::filesystem::path resolve(const std::string& rel) const {
    const std::filesystem::path p(rel);
    return p.is_absolute() ? p : base_dir / p;
  }

  [[nodiscard]] const CameraSpec& camera(int id) const {
    for (const auto& c : cameras)
      if (c.id == id) return c;
    throw InvalidInput("manifest: unknown camera " + std::to_string(id));
  }

  /// World pose of a camera at a frame.
  [[nodiscard]] geometry::Pose camera_to_world(int camera_id, int frame) const {
    return ego_poses.at(static_cast<std::size_t>(frame)) * camera(camera_id).extrinsic;
  }

  [[nodiscard]] std::vector<recon::ObjectBox> boxes_at(int frame) const {
    std::vector<recon::ObjectBox> out;
    for (const auto& b : boxes.at(static_cast<std::size_t>(frame))) {
      recon::ObjectBox ob;
      ob.id = b.id;
      ob.half_extents = b.half_extents;
      ob.poses.emplace(frame, b.pose);
      out.push_back(std::move(ob));
    }
    return out;
  }

  friend bool operator==(const SequenceManifest& a, const SequenceManifest& b) {
    return a.sequence_id == b.sequence_id && a.frame_count == b.frame_count && a.ego_poses == b.ego_poses &&
           a.cameras == b.cameras && a.scans == b.scans && a.boxes == b.boxes && a.masklets == b.masklets;
  }
};

/// Every validation failure found, one "location: problem" line each.
class ManifestError : public InvalidInput {
 public:
  explicit ManifestError(std::vector<std::string> errors)
      : InvalidInput(join(errors)), errors_(std::move(errors)) {}
  [[nodiscard]] const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& e) {
    std::string s = "manifest invalid (" + std::to_string(e.size()) + " errors)";
    for (const auto& x : e) s += "\n  " + x;
    return s;
  }
  std::vector<std::string> errors_;
};

namespace detail {

class Checker {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& where, const std::string& what) { errors.push_back(where + ": " + what); }

  const nlohmann::json* field(const nlohmann::json& obj, const std::string& where, const char* key) {
    if (!obj.is_object()) {
      fail(where, "expected an object");
      return nullptr;
    }
    const auto it = obj.find(key);
    if (it == obj.end()) {
      fail(where.empty() ? key : where + "." + key, "missing field");
      return nullptr;
    }
    return &*it;
  }

  template <typename T>
  bool get(const nlohmann::json& obj, const std::string& where, const char* key, T& out) {
    const auto* j = field(obj, where, key);
    if (!j) return false;
    return as(*j, where.empty() ? key : where + "." + key, out);
  }

  template <typename T>
  bool as(const nlohmann::json& j, const std::string& where, T& out) {
    try {
      out = j.get<T>();
      return true;
    } catch (const nlohmann::json::exception&) {
      fail(where, "wrong type");
      return false;
    }
  }

  bool pose(const nlohmann::json& j, const std::string& where, geometry::Pose& out) {
    std::vector<double> v;
    if (!as(j, where, v)) return false;
    if (v.size() != 16) {
      fail(where, "expected 16 numbers, got " + std::to_string(v.size()));
      return false;
    }
    std::array<double, 16> a{};
    std::copy(v.begin(), v.end(), a.begin());
    try {
      out = geometry::Pose::from_row_major(a);
      return true;
    } catch (const InvalidInput& e) {
      fail(where, e.what());
      return false;
    }
  }

  const nlohmann::json* array(const nlohmann::json& obj, const char* key) {
    const auto* j = field(obj, "", key);
    if (j && !j->is_array()) {
      fail(key, "expected an array");
      return nullptr;
    }
    return j;
  }
};

inline std::string at(const char* key, std::size_t i) { return std::string(key) + "[" + std::to_string(i) + "]"; }

}  // namespace detail

/// Parses and checks internal consistency. Collects every problem before
/// throwing ManifestError.
inline SequenceManifest manifest_from_json(const nlohmann::json& j) {
  detail::Checker c;
  SequenceManifest m;
  if (!j.is_object()) throw ManifestError({"(root): expected an object"});
  std::string format;
  if (c.get(j, "", "format", format) && format != "m4d-manifest") c.fail("format", "expected 'm4d-manifest'");
  std::uint32_t version = 0;
  if (c.get(j, "", "version", version) && version != kManifestVersion)
    c.fail("version", "unsupported version " + std::to_string(version));
  c.get(j, "", "sequence_id", m.sequence_id);
  const bool have_count = c.get(j, "", "frame_count", m.frame_count);
  if (have_count && m.frame_count < 1) c.fail("frame_count", "must be at least 1");

  if (const auto* a = c.array(j, "ego_poses")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      geometry::Pose p;
      c.pose((*a)[i], detail::at("ego_poses", i), p);
      m.ego_poses.push_back(p);
    }
    if (have_count && a->size() != static_cast<std::size_t>(m.frame_count))
      c.fail("ego_poses", std::to_string(a->size()) + " poses but frame_count is " + std::to_string(m.frame_count));
  }

  if (const auto* a = c.array(j, "cameras")) {
    std::set<int> ids;
    for (std::size_t i = 0; i < a->size(); ++i) {
      const std::string w = detail::at("cameras", i);
      CameraSpec cam;
      c.get((*a)[i], w, "id", cam.id);
      if (!ids.insert(cam.id).second) c.fail(w + ".id", "duplicate camera id " + std::to_string(cam.id));
      if (const auto* k = c.field((*a)[i], w, "intrinsics")) {
        const std::string wk = w + ".intrinsics";
        auto& in = cam.intrinsics;
        bool ok = c.get(*k, wk, "fx", in.fx);
        ok = c.get(*k, wk, "fy", in.fy) && ok;
        ok = c.get(*k, wk, "cx", in.cx) && ok;
        ok = c.get(*k, wk, "cy", in.cy) && ok;
        ok = c.get(*k, wk, "width", in.width) && ok;
        ok = c.get(*k, wk, "height", in.height) && ok;
        if (ok) {
          try {
            in.validate();
          } catch (const InvalidInput& e) {
            c.fail(wk, e.what());
          }
        }
      }
      if (const auto* e = c.field((*a)[i], w, "extrinsic")) c.pose(*e, w + ".extrinsic", cam.extrinsic);
      m.cameras.push_back(cam);
    }
    if (a->empty()) c.fail("cameras", "at least one camera is required");
  }

  if (const auto* a = c.array(j, "scans")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      std::string s;
      c.as((*a)[i], detail::at("scans", i), s);
      m.scans.push_back(s);
    }
    if (have_count && a->size() != static_cast<std::size_t>(m.frame_count))
      c.fail("scans", std::to_string(a->size()) + " scans but frame_count is " + std::to_string(m.frame_count));
  }

  if (const auto* a = c.array(j, "boxes")) {
    for (std::size_t f = 0; f < a->size(); ++f) {
      const std::string wf = detail::at("boxes", f);
      std::vector<BoxRecord> frame;
      if (!(*a)[f].is_array()) {
        c.fail(wf, "expected an array");
      } else {
        std::set<std::int64_t> ids;
        for (std::size_t i = 0; i < (*a)[f].size(); ++i) {
          const auto& bj = (*a)[f][i];
          const std::string w = wf + "[" + std::to_string(i) + "]";
          BoxRecord b;
          c.get(bj, w, "id", b.id);
          if (!ids.insert(b.id).second) c.fail(w + ".id", "duplicate box id " + std::to_string(b.id));
          std::vector<double> he;
          if (c.get(bj, w, "half_extents", he)) {
            if (he.size() != 3 || he[0] <= 0 || he[1] <= 0 || he[2] <= 0)
              c.fail(w + ".half_extents", "expected 3 positive numbers");
            else
              b.half_extents = Vec3(he[0], he[1], he[2]);
          }
          if (const auto* p = c.field(bj, w, "pose")) c.pose(*p, w + ".pose", b.pose);
          frame.push_back(b);
        }
      }
      m.boxes.push_back(std::move(frame));
    }
    if (have_count && a->size() != static_cast<std::size_t>(m.frame_count))
      c.fail("boxes", std::to_string(a->size()) + " frame entries but frame_count is " +
                          std::to_string(m.frame_count));
  }

  if (const auto* a = c.array(j, "masklets")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      std::string s;
      c.as((*a)[i], detail::at("masklets", i), s);
      m.masklets.push_back(s);
    }
  }
  if (!c.errors.empty()) throw ManifestError(std::move(c.errors));
  return m;
}

inline nlohmann::json manifest_to_json(const SequenceManifest& m) {
  using nlohmann::json;
  json poses = json::array();
  for (const auto& p : m.ego_poses) poses.push_back(p.to_row_major());
  json cams = json::array();
  for (const auto& c : m.cameras) {
    const auto& k = c.intrinsics;
    cams.push_back({{"id", c.id},
                    {"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
                                    {"width", k.width}, {"height", k.height}}},
                    {"extrinsic", c.extrinsic.to_row_major()}});
  }
  json boxes = json::array();
  for (const auto& frame : m.boxes) {
    json fb = json::array();
    for (const auto& b : frame)
      fb.push_back({{"id", b.id},
                    {"half_extents", {b.half_extents.x(), b.half_extents.y(), b.half_extents.z()}},
                    {"pose", b.pose.to_row_major()}});
    boxes.push_back(std::move(fb));
  }
  return {{"format", "m4d-manifest"}, {"version", kManifestVersion}, {"sequence_id", m.sequence_id},
          {"frame_count", m.frame_count}, {"ego_poses", poses}, {"cameras", cams},
          {"scans", m.scans}, {"boxes", boxes}, {"masklets", m.masklets}};
}

/// Appends a failure for every referenced file that is missing or does not
/// parse, and for masklets naming unknown cameras or frames.
inline void check_references(const SequenceManifest& m, std::vector<std::string>& errors) {
  for (std::size_t i = 0; i < m.scans.size(); ++i) {
    const auto p = m.resolve(m.scans[i]);
    try {
      (void)read_scan(p);
    } catch (const std::exception& e) {
      errors.push_back(detail::at("scans", i) + ": " + e.what());
    }
  }
  std::set<int> cams;
  for (const auto& c : m.cameras) cams.insert(c.id);
  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < m.masklets.size(); ++i) {
    const std::string w = detail::at("masklets", i);
    try {
      const auto ms = masklets2d_from_json(nlohmann::json::parse(read_file(m.resolve(m.masklets[i]))));
      for (const auto& mk : ms) {
        const std::string wm = w + " masklet " + std::to_string(mk.id);
        if (!ids.insert(mk.id).second) errors.push_back(wm + ": duplicate masklet id");
        if (!cams.count(mk.camera)) {
          errors.push_back(wm + ": unknown camera " + std::to_string(mk.camera));
        } else {
          const auto& k = m.camera(mk.camera).intrinsics;
          if (mk.width != k.width || mk.height != k.height)
            errors.push_back(wm + ": size " + std::to_string(mk.width) + "x" + std::to_string(mk.height) +
                             " does not match camera " + std::to_string(mk.camera));
        }
        for (const auto& [f, r] : mk.frames)
          if (f < 0 || f >= m.frame_count)
            errors.push_back(wm + ": frame " + std::to_string(f) + " outside [0, " + std::to_string(m.frame_count) +
                             ")");
      }
    } catch (const std::exception& e) {
      errors.push_back(w + ": " + e.what());
    }
  }
}

/// Reads, validates and resolves a manifest file.
inline SequenceManifest parse_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError({path.string() + ": " + e.what()});
  }
  std::vector<std::string> errors;
  SequenceManifest m;
  try {
    m = manifest_from_json(j);
  } catch (const ManifestError& e) {
    errors = e.errors();
  }
  m.base_dir = path.parent_path();
  if (errors.empty()) check_references(m, errors);
  if (!errors.empty()) throw ManifestError(std::move(errors));
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const SequenceManifest& m) {
  write_file(path, manifest_to_json(m).dump(2) + "\n");
}

/// Loads all 2D masklets referenced by a manifest, sorted by id.
inline std::vector<fusion::Masklet2D> load_masklets(const SequenceManifest& m) {
  std::vector<fusion::Masklet2D> out;
  for (const auto& f : m.masklets) {
    auto ms = masklets2d_from_json(nlohmann::json::parse(read_file(m.resolve(f))));
    out.insert(out.end(), ms.begin(), ms.end());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

inline std::vector<std::vector<Vec3>> load_scans(const SequenceManifest& m) {
  std::vector<std::vector<Vec3>> out;
  for (const auto& s : m.scans) out.push_back(read_scan(m.resolve(s)));
  return out;
}

}  // namespace m4d::io

#endif  // M4D_IO_MANIFEST_HPP
