// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Pipeline stages over a sequence manifest, with content-addressed caching.

#ifndef M4D_ENGINE_PIPELINE_HPP
#define M4D_ENGINE_PIPELINE_HPP

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "m4d/fusion/fuse.hpp"
#include "m4d/io/cache.hpp"
#include "m4d/io/config.hpp"
#include "m4d/io/formats.hpp"
#include "m4d/io/manifest.hpp"
#include "m4d/metrics/report.hpp"
#include "m4d/metrics/stats.hpp"
#include "m4d/protocol/protocols.hpp"

namespace m4d::engine {

using nlohmann::json;

/// A manifest with its scans and 2D masklets loaded.
struct SequenceData {
  io::SequenceManifest manifest;
  std::vector<std::vector<Vec3>> scans;
  std::vector<fusion::Masklet2D> masklets;
};

inline SequenceData load_sequence(const std::filesystem::path& manifest_path) {
  SequenceData d;
  d.manifest = io::parse_manifest(manifest_path);
  d.scans = io::load_scans(d.manifest);
  d.masklets = io::load_masklets(d.manifest);
  return d;
}

inline recon::Reconstruction reconstruct(const io::SequenceManifest& m, const std::vector<std::vector<Vec3>>& scans,
                                         const io::ReconConfig& cfg) {
  recon::Reconstruction rc(cfg.voxel_size);
  for (int f = 0; f < m.frame_count; ++f) {
    const auto boxes = m.boxes_at(f);
    rc.integrate_frame(scans.at(static_cast<std::size_t>(f)), m.ego_poses.at(static_cast<std::size_t>(f)), boxes, f);
  }
  return rc;
}

/// One slice per (camera, frame). Objects without a box at a frame are left out.
inline recon::PixelVoxelTable raycast_all(const recon::Reconstruction& rc, const io::SequenceManifest& m,
                                          const io::ReconConfig& cfg) {
  recon::PixelVoxelTable table;
  for (int f = 0; f < m.frame_count; ++f) {
    const auto scene = recon::RaycastScene::at_frame(rc, f, true);
    for (const auto& cam : m.cameras)
      table.emplace(std::pair{cam.id, f}, recon::raycast_table(scene, m.camera_to_world(cam.id, f), cam.intrinsics,
                                                               cam.id, f, cfg.max_range));
  }
  return table;
}

inline std::vector<fusion::FrameScan> frame_scans(const io::SequenceManifest& m,
                                                  const std::vector<std::vector<Vec3>>& scans) {
  std::vector<fusion::FrameScan> out;
  for (int f = 0; f < m.frame_count; ++f)
    out.push_back({m.ego_poses[static_cast<std::size_t>(f)], scans[static_cast<std::size_t>(f)]});
  return out;
}

inline fusion::FusionResult fuse_sequence(const recon::Reconstruction& rc, const recon::PixelVoxelTable& table,
                                          const SequenceData& d, const fusion::FusionParams& params) {
  const auto fs = frame_scans(d.manifest, d.scans);
  return fusion::fuse(rc, table, d.masklets, fs, params);
}

inline json scores_json(const fusion::FusionResult& r) {
  json ms = json::array();
  for (const auto& m : r.masklets) {
    ms.push_back({{"id", m.voxels.id},
                  {"score", m.score.score ? json(*m.score.score) : json(nullptr)},
                  {"images", m.score.images},
                  {"voxels", m.voxels.voxels.size()},
                  {"sources", m.sources}});
  }
  json dropped = json::array();
  for (const auto& [id, s] : r.sources)
    if (s.all_noise) dropped.push_back(id);
  return {{"format", "m4d-scores"}, {"version", io::kFormatVersion}, {"masklets", ms}, {"all_noise_sources", dropped}};
}

inline metrics::DatasetInput stats_input(const SequenceData& d, const fusion::FusionResult& r) {
  metrics::DatasetInput in;
  in.frame_count = d.manifest.frame_count;
  for (const auto& c : d.manifest.cameras)
    for (int f = 0; f < in.frame_count; ++f) in.images.emplace_back(c.id, f);
  for (const auto& m : r.masklets) {
    const auto id = m.voxels.id;
    in.volume[id] = m.voxels.voxels.size();
    in.score[id] = m.score.score;
    auto& area = in.image_area[id];
    for (auto src : m.sources) {
      const auto it = std::find_if(d.masklets.begin(), d.masklets.end(), [&](const auto& x) { return x.id == src; });
      if (it == d.masklets.end()) continue;
      for (const auto& [f, rle] : it->frames) {
        const std::size_t n = io::rle_decode(rle).count();
        if (n > 0) area[{it->camera, f}] += n;
      }
    }
    auto& pts = in.scan_points[id];
    for (const auto& [f, idx] : m.points.frames)
      if (!idx.empty()) pts[f] = idx.size();
  }
  return in;
}

/// Protocol input for one camera: image ground truth from the 2D masklets,
/// LiDAR ground truth from the fused point masklets they ended up in.
inline protocol::ProtocolSequence protocol_sequence(const SequenceData& d, const fusion::FusionResult& r, int camera) {
  const auto& cam = d.manifest.camera(camera);
  protocol::ProtocolSequence seq;
  seq.id = d.manifest.sequence_id;
  seq.frames = d.manifest.frame_count;
  seq.width = cam.intrinsics.width;
  seq.height = cam.intrinsics.height;
  seq.scans = d.scans;
  std::map<std::int64_t, const fusion::Masklet3D*> points_of;
  for (const auto& m : r.masklets) points_of[m.voxels.id] = &m.points;
  for (const auto& mk : d.masklets) {
    if (mk.camera != camera) continue;
    auto& truth = seq.objects[mk.object_id];
    if (truth.image.empty()) {
      for (int f = 0; f < seq.frames; ++f) {
        truth.image.emplace_back(seq.width, seq.height);
        truth.lidar.push_back(BinaryMask::points(d.scans[static_cast<std::size_t>(f)].size()));
      }
    }
    for (int f = 0; f < seq.frames; ++f) {
      const BinaryMask m = mk.mask(f);
      auto& dst = truth.image[static_cast<std::size_t>(f)];
      for (std::size_t i = 0; i < m.bits.size(); ++i) dst.bits[i] |= m.bits[i];
    }
    const auto it = r.id_map.find(mk.id);
    if (it == r.id_map.end()) continue;
    const auto* pts = points_of.at(it->second);
    for (const auto& [f, idx] : pts->frames)
      for (auto i : idx) truth.lidar[static_cast<std::size_t>(f)].bits[i] = 1;
  }
  return seq;
}

inline protocol::ProtocolResult run_protocol(const protocol::ProtocolSequence& seq, const io::EngineConfig& cfg) {
  protocol::PerfectOracle perfect;
  protocol::NoisyGtOracle noisy(cfg.oracle);
  const protocol::SegmenterOracle& oracle =
      cfg.eval.oracle == "perfect" ? static_cast<const protocol::SegmenterOracle&>(perfect) : noisy;
  protocol::ProtocolOptions opt = cfg.protocol;
  opt.boundary_tolerance = cfg.metrics.boundary_tolerance;
  const std::vector<std::int64_t> all;
  if (cfg.eval.protocol == "offline") return protocol::run_offline(oracle, seq, all, opt);
  if (cfg.eval.protocol == "online") return protocol::run_online(oracle, seq, all, opt);
  const auto kind = cfg.eval.prompt == "box"    ? protocol::SemiPrompt::kBox
                    : cfg.eval.prompt == "mask" ? protocol::SemiPrompt::kMask
                                                : protocol::SemiPrompt::kClick;
  return protocol::run_semisupervised(oracle, seq, all, kind, cfg.eval.n_clicks, opt);
}

inline json protocol_report_json(const protocol::ProtocolResult& r, const io::EngineConfig& cfg,
                                 const std::string& sequence_id) {
  json prompts = json::array();
  for (const auto& e : r.prompts) {
    json p = {{"round", e.round}, {"object", e.object}, {"modality", to_string(e.prompt.modality)},
              {"kind", protocol::to_string(e.prompt.kind)}, {"frame", e.prompt.frame}};
    if (const auto* c = std::get_if<protocol::Click>(&e.prompt.payload)) p["element"] = c->element;
    prompts.push_back(std::move(p));
  }
  json frames = json::object();
  for (const auto& [id, fs] : r.prompted_frames) frames[std::to_string(id)] = fs;
  return {{"format", "m4d-eval-report"},
          {"version", metrics::kReportVersion},
          {"metadata",
           {{"sequence", sequence_id},
            {"protocol", r.protocol},
            {"iou_threshold", r.options.iou_threshold},
            {"clicks_per_prompt", r.options.clicks_per_prompt},
            {"frame_budget", r.options.frame_budget},
            {"oracle", cfg.eval.oracle},
            {"oracle_seed", cfg.oracle.seed},
            {"oracle_rate", cfg.oracle.rate},
            {"prompt", cfg.eval.prompt},
            {"camera", cfg.eval.camera}}},
          {"image", metrics::modality_json(r.image)},
          {"lidar", metrics::modality_json(r.lidar)},
          {"round_prompted_iou", r.round_prompted_iou},
          {"round_sequence_iou", r.round_sequence_iou},
          {"prompted_frames", frames},
          {"prompts", prompts}};
}

/// Stage outputs with the cache keys that produced them.
struct StageKeys {
  std::string reconstruct;
  std::string raycast;
  std::string fuse;
};

/**
 * Runs stages through an artifact cache in cfg.work_dir. Each artifact's key
 * hashes its inputs and the config sections it reads, so an unchanged stage
 * is loaded instead of recomputed.
 */
class CachedPipeline {
 public:
  CachedPipeline(const SequenceData& data, io::EngineConfig cfg)
      : data_(data), cfg_(std::move(cfg)), cache_(cfg_.work_dir) {}

  [[nodiscard]] std::string reconstruct_key() const {
    io::Sha256 h;
    h.field("reconstruct").field(io::manifest_to_json(data_.manifest).dump());
    for (const auto& s : data_.scans) h.field(io::encode_scan(s));
    h.field(io::config_section(cfg_, "recon"));
    return h.hex();
  }

  recon::Reconstruction reconstruction(bool* hit = nullptr) {
    const auto bytes = cache_.get_or_make("reconstruct", reconstruct_key(), [&] {
      return io::encode_reconstruction(reconstruct(data_.manifest, data_.scans, cfg_.recon));
    }, hit);
    return io::decode_reconstruction(bytes);
  }

  [[nodiscard]] std::string raycast_key() const {
    return io::Sha256().field("raycast").field(reconstruct_key()).hex();
  }

  recon::PixelVoxelTable table(const recon::Reconstruction& rc, bool* hit = nullptr) {
    const auto bytes = cache_.get_or_make("raycast", raycast_key(), [&] {
      return io::encode_table(raycast_all(rc, data_.manifest, cfg_.recon));
    }, hit);
    return io::decode_table(bytes);
  }

  [[nodiscard]] std::string fuse_key(const fusion::FusionParams& p) const {
    io::EngineConfig c = cfg_;
    c.fusion = p;
    return io::Sha256()
        .field("fuse")
        .field(raycast_key())
        .field(io::masklets2d_to_json(data_.masklets).dump())
        .field(io::config_section(c, "fusion"))
        .hex();
  }

  /// Writes voxel masklets, point masklets and scores; returns their paths.
  std::map<std::string, std::filesystem::path> write_fusion(const fusion::FusionResult& r,
                                                            const fusion::FusionParams& p) {
    const auto key = fuse_key(p);
    std::vector<fusion::VoxelMasklet> vms;
    std::vector<fusion::Masklet3D> pms;
    for (const auto& m : r.masklets) {
      vms.push_back(m.voxels);
      pms.push_back(m.points);
    }
    std::map<std::string, std::filesystem::path> out{
        {"voxels", cache_.path_for("fuse", key, ".voxels.bin")},
        {"points", cache_.path_for("fuse", key, ".points.bin")},
        {"scores", cache_.path_for("fuse", key, ".scores.json")}};
    io::write_file(out["voxels"], io::encode_voxel_masklets(vms));
    io::write_file(out["points"], io::encode_point_masklets(pms));
    io::write_file(out["scores"], scores_json(r).dump(2) + "\n");
    return out;
  }

  [[nodiscard]] const io::EngineConfig& config() const { return cfg_; }
  [[nodiscard]] io::ArtifactCache& cache() { return cache_; }

 private:
  const SequenceData& data_;
  io::EngineConfig cfg_;
  io::ArtifactCache cache_;
};

}  // namespace m4d::engine

#endif  // M4D_ENGINE_PIPELINE_HPP
