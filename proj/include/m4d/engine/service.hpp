// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// HTTP review service under /api/v1/. Handlers are plain member functions
// returning (status, JSON) so they can be exercised without a socket; bind()
// wires them to a cpp-httplib server.
//
//   GET  /api/v1/sequences
//   GET  /api/v1/sequences/{id}/frames/{f}
//   GET  /api/v1/parameters
//   PUT  /api/v1/parameters
//   POST /api/v1/refuse            409 while another re-fuse runs
//   GET  /api/v1/refuse
//   POST /api/v1/masklets/{id}/verdict   {"verdict": "accept" | "reject"}
//   GET  /api/v1/masklets/{id}/verdict

#ifndef M4D_ENGINE_SERVICE_HPP
#define M4D_ENGINE_SERVICE_HPP

// Eigen must be seen before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "m4d/engine/pipeline.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace m4d::engine {

inline constexpr int kApiVersion = 1;

struct ApiResponse {
  int status = 200;
  json body;
};

/// A sequence with its fixed reconstruction and pixel-voxel table.
struct ServedSequence {
  SequenceData data;
  recon::Reconstruction recon;
  recon::PixelVoxelTable table;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

class ReviewService {
 public:
  /// Holds the re-fuse slot for as long as it lives.
  class RefuseSlot {
   public:
    explicit RefuseSlot(std::atomic<bool>& busy) : busy_(&busy) {}
    RefuseSlot(RefuseSlot&& o) noexcept : busy_(std::exchange(o.busy_, nullptr)) {}
    RefuseSlot& operator=(RefuseSlot&&) = delete;
    ~RefuseSlot() {
      if (busy_) busy_->store(false);
    }

   private:
    std::atomic<bool>* busy_;
  };

  ReviewService(std::vector<ServedSequence> sequences, fusion::FusionParams params,
                std::filesystem::path verdict_log)
      : verdict_log_(std::move(verdict_log)) {
    params.validate();
    state_ = std::make_shared<State>();
    state_->params = params;
    for (auto& s : sequences) {
      auto entry = std::make_shared<Entry>();
      const std::string id = s.data.manifest.sequence_id;
      entry->seq = std::move(s);
      order_.push_back(id);
      if (!entries_.emplace(id, entry).second) throw InvalidInput("service: duplicate sequence id " + id);
      state_->results[id] = std::make_shared<const fusion::FusionResult>(
          fuse_sequence(entry->seq.recon, entry->seq.table, entry->seq.data, params));
    }
    load_verdicts();
  }

  ApiResponse list_sequences() const {
    json arr = json::array();
    for (const auto& id : order_) {
      const auto& m = entries_.at(id)->seq.data.manifest;
      json cams = json::array();
      for (const auto& c : m.cameras)
        cams.push_back({{"id", c.id}, {"width", c.intrinsics.width}, {"height", c.intrinsics.height}});
      arr.push_back({{"id", id}, {"frames", m.frame_count}, {"cameras", cams}});
    }
    return ok({{"sequences", arr}});
  }

  ApiResponse frame_bundle(const std::string& seq_id, int frame) const {
    const auto it = entries_.find(seq_id);
    if (it == entries_.end()) return error(404, "unknown sequence '" + seq_id + "'");
    const ServedSequence& s = it->second->seq;
    if (frame < 0 || frame >= s.data.manifest.frame_count)
      return error(404, "frame " + std::to_string(frame) + " outside [0, " +
                            std::to_string(s.data.manifest.frame_count) + ")");
    const auto result = snapshot().results.at(seq_id);

    json images = json::array();
    for (const auto& cam : s.data.manifest.cameras) {
      json overlays = json::array();
      for (const auto& mk : s.data.masklets) {
        if (mk.camera != cam.id) continue;
        const auto f = mk.frames.find(frame);
        if (f == mk.frames.end()) continue;
        const auto mapped = result->id_map.find(mk.id);
        overlays.push_back({{"source", mk.id},
                            {"masklet", mapped == result->id_map.end() ? json(nullptr) : json(mapped->second)},
                            {"rle", io::rle_to_json(f->second)}});
      }
      images.push_back({{"camera", cam.id}, {"width", cam.intrinsics.width}, {"height", cam.intrinsics.height},
                        {"overlays", overlays}});
    }
    json lidar = json::array();
    json bev = json::array();
    json scores = json::array();
    for (const auto& m : result->masklets) {
      const auto pf = m.points.frames.find(frame);
      lidar.push_back({{"masklet", m.voxels.id},
                       {"indices", pf == m.points.frames.end() ? std::vector<std::uint32_t>{} : pf->second}});
      std::set<std::pair<std::int64_t, std::int64_t>> cells;
      json pts = json::array();
      for (const auto& [v, c] : m.voxels.voxels) {
        if (!v.grid.is_background() && !s.recon.boxes.at(v.grid.object_id).present(frame)) continue;
        const Vec3 p = s.recon.world_center(v, frame);
        const double vs = s.recon.voxel_size;
        if (!cells.insert({static_cast<std::int64_t>(std::floor(p.x() / vs)),
                           static_cast<std::int64_t>(std::floor(p.y() / vs))})
                 .second)
          continue;
        pts.push_back({p.x(), p.y()});
      }
      bev.push_back({{"masklet", m.voxels.id}, {"voxels", m.voxels.voxels.size()}, {"points", pts}});
      scores.push_back({{"masklet", m.voxels.id},
                        {"score", m.score.score ? json(*m.score.score) : json(nullptr)},
                        {"status", m.score.score ? "scored" : "no_score"}});
    }
    return ok({{"sequence", seq_id}, {"frame", frame}, {"images", images}, {"lidar", lidar}, {"bev", bev},
               {"scores", scores}});
  }

  ApiResponse get_parameters() const { return ok(parameters_json(snapshot().params)); }

  /// Partial update; applied only if the full resulting set is valid.
  ApiResponse put_parameters(const json& body) {
    if (!body.is_object()) return error(400, "expected a JSON object");
    std::unique_lock lock(mutex_);
    fusion::FusionParams p = state_->params;
    std::vector<std::string> problems;
    for (const auto& [key, value] : body.items()) {
      if (!value.is_number()) {
        problems.push_back(key + " must be a number");
        continue;
      }
      if (key == "eps") {
        p.eps = value.get<double>();
      } else if (key == "min_pts") {
        if (!value.is_number_integer()) problems.push_back("min_pts must be an integer");
        else p.min_pts = value.get<int>();
      } else if (key == "vote_threshold") {
        p.vote_threshold = value.get<double>();
      } else if (key == "overlap_threshold") {
        p.overlap_threshold = value.get<double>();
      } else if (key == "transfer_radius") {
        p.transfer_radius = value.get<double>();
      } else {
        problems.push_back("unknown parameter '" + key + "'");
      }
    }
    const auto v = p.violations();
    problems.insert(problems.end(), v.begin(), v.end());
    if (!problems.empty()) {
      ApiResponse r = error(422, "validation failed");
      r.body["violations"] = problems;
      return r;
    }
    auto next = std::make_shared<State>(*state_);
    next->params = p;
    state_ = std::move(next);
    return ok(parameters_json(p));
  }

  /// Claims the single re-fuse slot; empty if a re-fuse is already running.
  std::optional<RefuseSlot> try_acquire_refuse() {
    bool expected = false;
    if (!busy_.compare_exchange_strong(expected, true)) return std::nullopt;
    return RefuseSlot(busy_);
  }

  /// Re-runs fusion on every sequence with the current parameters.
  ApiResponse refuse() {
    auto slot = try_acquire_refuse();
    if (!slot) {
      ApiResponse r{409, versioned({{"status", "busy"}})};
      return r;
    }
    const auto before = snapshot();
    std::map<std::string, std::shared_ptr<const fusion::FusionResult>> results;
    for (const auto& id : order_) {
      const auto& s = entries_.at(id)->seq;
      results[id] = std::make_shared<const fusion::FusionResult>(fuse_sequence(s.recon, s.table, s.data, before.params));
    }
    json scores = json::array();
    for (const auto& id : order_) {
      std::map<std::int64_t, std::optional<double>> prev;
      for (const auto& m : before.results.at(id)->masklets) prev[m.voxels.id] = m.score.score;
      for (const auto& m : results[id]->masklets) {
        const auto p = prev.find(m.voxels.id);
        const std::optional<double> old = p == prev.end() ? std::nullopt : p->second;
        json delta = (m.score.score && old) ? json(*m.score.score - *old) : json(nullptr);
        scores.push_back({{"sequence", id},
                          {"masklet", m.voxels.id},
                          {"score", m.score.score ? json(*m.score.score) : json(nullptr)},
                          {"previous", old ? json(*old) : json(nullptr)},
                          {"delta", delta},
                          {"voxels", m.voxels.voxels.size()}});
      }
    }
    {
      std::unique_lock lock(mutex_);
      auto next = std::make_shared<State>(*state_);
      next->results = std::move(results);
      next->fused_with = before.params;
      ++next->generation;
      state_ = std::move(next);
      last_refuse_ = {{"generation", state_->generation}, {"parameters", params_values(before.params)}};
    }
    return ok({{"status", "done"}, {"parameters", params_values(before.params)}, {"scores", scores}});
  }

  ApiResponse refuse_status() const {
    std::shared_lock lock(mutex_);
    return ok({{"status", busy_.load() ? "running" : "idle"}, {"last", last_refuse_}});
  }

  ApiResponse post_verdict(std::int64_t id, const json& body) {
    if (!body.is_object() || !body.contains("verdict") || !body["verdict"].is_string())
      return error(400, "expected {\"verdict\": \"accept\" | \"reject\"}");
    const std::string v = body["verdict"].get<std::string>();
    if (v != "accept" && v != "reject") return error(400, "verdict must be 'accept' or 'reject'");
    const auto seq = owner_of(id);
    if (!seq) return error(404, "unknown masklet " + std::to_string(id));
    json rec = {{"masklet", id}, {"verdict", v}, {"timestamp", utc_timestamp()}, {"sequence", *seq}};
    std::unique_lock lock(verdict_mutex_);
    if (verdict_log_.has_parent_path()) std::filesystem::create_directories(verdict_log_.parent_path());
    std::ofstream out(verdict_log_, std::ios::app);
    if (!out) return error(500, "cannot open verdict log");
    out << rec.dump() << "\n";
    out.flush();
    if (!out) return error(500, "cannot write verdict log");
    verdicts_[id] = rec;
    return ok({{"verdict", rec}});
  }

  ApiResponse get_verdict(std::int64_t id) const {
    if (!owner_of(id)) return error(404, "unknown masklet " + std::to_string(id));
    std::unique_lock lock(verdict_mutex_);
    const auto it = verdicts_.find(id);
    return ok({{"masklet", id}, {"verdict", it == verdicts_.end() ? json(nullptr) : it->second}});
  }

  void bind(httplib::Server& srv) {
    auto send = [](httplib::Response& res, const ApiResponse& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    auto parse = [](const httplib::Request& req) -> std::optional<json> {
      try {
        return json::parse(req.body);
      } catch (const json::exception&) {
        return std::nullopt;
      }
    };
    srv.Get("/api/v1/sequences", [=, this](const httplib::Request&, httplib::Response& res) {
      send(res, list_sequences());
    });
    srv.Get(R"(/api/v1/sequences/([^/]+)/frames/(-?\d+))", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, frame_bundle(req.matches[1], std::stoi(req.matches[2])));
    });
    srv.Get("/api/v1/parameters", [=, this](const httplib::Request&, httplib::Response& res) {
      send(res, get_parameters());
    });
    srv.Put("/api/v1/parameters", [=, this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse(req);
      send(res, body ? put_parameters(*body) : error(400, "malformed JSON"));
    });
    srv.Post("/api/v1/refuse", [=, this](const httplib::Request&, httplib::Response& res) { send(res, refuse()); });
    srv.Get("/api/v1/refuse", [=, this](const httplib::Request&, httplib::Response& res) {
      send(res, refuse_status());
    });
    srv.Post(R"(/api/v1/masklets/(-?\d+)/verdict)", [=, this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse(req);
      send(res, body ? post_verdict(std::stoll(req.matches[1]), *body) : error(400, "malformed JSON"));
    });
    srv.Get(R"(/api/v1/masklets/(-?\d+)/verdict)", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_verdict(std::stoll(req.matches[1])));
    });
    srv.set_error_handler([=](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send(res, error(res.status, "not found"));
    });
  }

 private:
  struct Entry {
    ServedSequence seq;
  };
  struct State {
    fusion::FusionParams params;
    fusion::FusionParams fused_with;
    std::uint64_t generation = 0;
    std::map<std::string, std::shared_ptr<const fusion::FusionResult>> results;
  };

  static json versioned(json body) {
    body["version"] = kApiVersion;
    return body;
  }
  static ApiResponse ok(json body) { return {200, versioned(std::move(body))}; }
  static ApiResponse error(int status, const std::string& msg) { return {status, versioned({{"error", msg}})}; }

  static json params_values(const fusion::FusionParams& p) {
    return {{"eps", p.eps}, {"min_pts", p.min_pts}, {"vote_threshold", p.vote_threshold},
            {"overlap_threshold", p.overlap_threshold}, {"transfer_radius", p.transfer_radius}};
  }
  static json parameters_json(const fusion::FusionParams& p) {
    json bounds = json::object();
    for (const auto& b : fusion::FusionParams::kBounds)
      bounds[b.name] = {{"min", b.lo}, {"max", b.hi}, {"min_inclusive", b.lo_inclusive}, {"max_inclusive", true}};
    return {{"parameters", params_values(p)}, {"bounds", bounds}};
  }

  [[nodiscard]] State snapshot() const {
    std::shared_lock lock(mutex_);
    return *state_;
  }

  [[nodiscard]] std::optional<std::string> owner_of(std::int64_t id) const {
    const auto s = snapshot();
    for (const auto& seq : order_)
      for (const auto& m : s.results.at(seq)->masklets)
        if (m.voxels.id == id) return seq;
    return std::nullopt;
  }

  void load_verdicts() {
    std::ifstream in(verdict_log_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const auto rec = json::parse(line);
        verdicts_[rec.at("masklet").get<std::int64_t>()] = rec;
      } catch (const json::exception&) {
        // a torn last line from an interrupted write is ignored
      }
    }
  }

  std::map<std::string, std::shared_ptr<Entry>> entries_;
  std::vector<std::string> order_;
  mutable std::shared_mutex mutex_;
  std::shared_ptr<State> state_;
  json last_refuse_ = nullptr;
  std::atomic<bool> busy_{false};
  std::filesystem::path verdict_log_;
  mutable std::mutex verdict_mutex_;
  std::map<std::int64_t, json> verdicts_;
};

/// Loads (or builds via the cache) everything the service needs for one manifest.
inline ServedSequence serve_sequence(const std::filesystem::path& manifest, const io::EngineConfig& cfg) {
  ServedSequence s;
  s.data = load_sequence(manifest);
  CachedPipeline p(s.data, cfg);
  s.recon = p.reconstruction();
  s.table = p.table(s.recon);
  return s;
}

}  // namespace m4d::engine

#endif  // M4D_ENGINE_SERVICE_HPP
