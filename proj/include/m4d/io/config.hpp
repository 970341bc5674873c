// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Engine configuration: an INI file with one section per module. Every key
// has a default; `write_default_config` emits them all.

#ifndef M4D_IO_CONFIG_HPP
#define M4D_IO_CONFIG_HPP

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "m4d/fusion/fuse.hpp"
#include "m4d/protocol/oracle.hpp"
#include "m4d/protocol/protocols.hpp"

namespace m4d::io {

struct ReconConfig {
  double voxel_size = recon::kDefaultVoxelSize;
  double max_range = 80.0;
};

struct PosencConfig {
  int dim = 48;
  double base_wavelength_px = 32.0;
  double base_wavelength_m = 2.0;
  double amplitude = 1.0;
  int depth_bins = 8;
  double depth_near = 1.0;
  double depth_far = 60.0;
  std::uint64_t mlp_seed = 0;
};

struct MemoryConfig {
  int unprompted = 6;
  int prompted = 2;
  int heads = 1;
};

struct MetricsConfig {
  double boundary_tolerance = metrics::kDefaultBoundaryTolerance;
};

struct EvalConfig {
  std::string protocol = "online";  // offline | online | semisupervised
  std::string prompt = "click";     // semisupervised: click | box | mask
  int n_clicks = 1;
  std::string oracle = "noisy";     // perfect | noisy
  int camera = 0;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string verdict_log = "verdicts.jsonl";
};

struct EngineConfig {
  std::filesystem::path work_dir = "work";
  std::uint64_t seed = 0;
  ReconConfig recon;
  PosencConfig posenc;
  MemoryConfig memory;
  fusion::FusionParams fusion;
  MetricsConfig metrics;
  protocol::ProtocolOptions protocol;
  protocol::NoiseConfig oracle;
  EvalConfig eval;
  ServiceConfig service;
};

inline const char* to_string(protocol::CorruptionMode m) {
  switch (m) {
    case protocol::CorruptionMode::kMixed: return "mixed";
    case protocol::CorruptionMode::kDrop: return "drop";
    case protocol::CorruptionMode::kShrink: return "shrink";
  }
  return "?";
}

inline protocol::CorruptionMode corruption_mode_from_string(const std::string& s) {
  if (s == "mixed") return protocol::CorruptionMode::kMixed;
  if (s == "drop") return protocol::CorruptionMode::kDrop;
  if (s == "shrink") return protocol::CorruptionMode::kShrink;
  throw InvalidInput("oracle.mode: expected mixed, drop or shrink, got '" + s + "'");
}

namespace detail {

/// Visits every (section.key, field) pair; `f(name, field&)`.
template <typename Config, typename F>
void visit_config(Config& c, F&& f) {
  f("pipeline.work_dir", c.work_dir);
  f("pipeline.seed", c.seed);
  f("recon.voxel_size", c.recon.voxel_size);
  f("recon.max_range", c.recon.max_range);
  f("posenc.dim", c.posenc.dim);
  f("posenc.base_wavelength_px", c.posenc.base_wavelength_px);
  f("posenc.base_wavelength_m", c.posenc.base_wavelength_m);
  f("posenc.amplitude", c.posenc.amplitude);
  f("posenc.depth_bins", c.posenc.depth_bins);
  f("posenc.depth_near", c.posenc.depth_near);
  f("posenc.depth_far", c.posenc.depth_far);
  f("posenc.mlp_seed", c.posenc.mlp_seed);
  f("memory.unprompted", c.memory.unprompted);
  f("memory.prompted", c.memory.prompted);
  f("memory.heads", c.memory.heads);
  f("fusion.eps", c.fusion.eps);
  f("fusion.min_pts", c.fusion.min_pts);
  f("fusion.vote_threshold", c.fusion.vote_threshold);
  f("fusion.overlap_threshold", c.fusion.overlap_threshold);
  f("fusion.transfer_radius", c.fusion.transfer_radius);
  f("metrics.boundary_tolerance", c.metrics.boundary_tolerance);
  f("protocol.clicks_per_prompt", c.protocol.clicks_per_prompt);
  f("protocol.frame_budget", c.protocol.frame_budget);
  f("protocol.iou_threshold", c.protocol.iou_threshold);
  f("protocol.link_radius", c.protocol.link_radius);
  f("oracle.seed", c.oracle.seed);
  f("oracle.rate", c.oracle.rate);
  f("oracle.magnitude", c.oracle.magnitude);
  f("oracle.mode", c.oracle.mode);
  f("oracle.iou_floor", c.oracle.iou_floor);
  f("eval.protocol", c.eval.protocol);
  f("eval.prompt", c.eval.prompt);
  f("eval.n_clicks", c.eval.n_clicks);
  f("eval.oracle", c.eval.oracle);
  f("eval.camera", c.eval.camera);
  f("service.host", c.service.host);
  f("service.port", c.service.port);
  f("service.verdict_log", c.service.verdict_log);
}

template <typename T>
std::string format_value(const T& v) {
  if constexpr (std::is_same_v<T, std::filesystem::path>) {
    return v.string();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, protocol::CorruptionMode>) {
    return to_string(v);
  } else if constexpr (std::is_floating_point_v<T>) {
    // Shortest text that reads back to the same double.
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  } else {
    return std::to_string(v);
  }
}

template <typename T>
void parse_value(const std::string& name, const std::string& text, T& out) {
  if constexpr (std::is_same_v<T, std::filesystem::path> || std::is_same_v<T, std::string>) {
    out = text;
  } else if constexpr (std::is_same_v<T, protocol::CorruptionMode>) {
    out = corruption_mode_from_string(text);
  } else {
    std::istringstream s(text);
    T v{};
    s >> v;
    if (!s || !(s >> std::ws).eof()) throw InvalidInput(name + ": cannot parse '" + text + "'");
    out = v;
  }
}

}  // namespace detail

/// Sets one `section.key` from its text form. Unknown keys are rejected.
inline void set_config_value(EngineConfig& c, const std::string& name, const std::string& value) {
  bool found = false;
  detail::visit_config(c, [&](const char* n, auto& field) {
    if (name == n) {
      detail::parse_value(name, value, field);
      found = true;
    }
  });
  if (!found) throw InvalidInput("unknown config key '" + name + "'");
}

inline void validate_config(const EngineConfig& c) {
  if (!(c.recon.voxel_size > 0.0)) throw InvalidInput("recon.voxel_size must be positive");
  if (!(c.recon.max_range > 0.0)) throw InvalidInput("recon.max_range must be positive");
  if (c.memory.unprompted < 1 || c.memory.prompted < 1) throw InvalidInput("memory capacities must be >= 1");
  c.fusion.validate();
  c.protocol.validate();
  c.oracle.validate();
  if (c.eval.protocol != "offline" && c.eval.protocol != "online" && c.eval.protocol != "semisupervised")
    throw InvalidInput("eval.protocol: expected offline, online or semisupervised");
  if (c.eval.prompt != "click" && c.eval.prompt != "box" && c.eval.prompt != "mask")
    throw InvalidInput("eval.prompt: expected click, box or mask");
  if (c.eval.oracle != "perfect" && c.eval.oracle != "noisy")
    throw InvalidInput("eval.oracle: expected perfect or noisy");
}

inline EngineConfig config_from_ini(std::istream& in, const std::string& what = "config") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidInput(what + ": " + e.what());
  }
  EngineConfig c;
  for (const auto& [section, keys] : tree) {
    if (keys.empty()) {
      if (!keys.data().empty()) throw InvalidInput(what + ": key '" + section + "' outside a section");
      continue;
    }
    for (const auto& [key, value] : keys) set_config_value(c, section + "." + key, value.data());
  }
  validate_config(c);
  return c;
}

inline EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config " + path.string());
  return config_from_ini(in, path.string());
}

inline std::string config_to_ini(const EngineConfig& c) {
  std::string out;
  std::string section;
  detail::visit_config(c, [&](const char* n, auto& field) {
    const std::string name(n);
    const auto dot = name.find('.');
    const std::string sec = name.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
      section = sec;
    }
    out += name.substr(dot + 1) + " = " + detail::format_value(field) + "\n";
  });
  return out;
}

/// Text of one section, used to key cached artifacts.
inline std::string config_section(const EngineConfig& c, const std::string& section) {
  std::string out;
  detail::visit_config(c, [&](const char* n, auto& field) {
    const std::string name(n);
    if (name.rfind(section + ".", 0) == 0) out += name + "=" + detail::format_value(field) + "\n";
  });
  return out;
}

}  // namespace m4d::io

#endif  // M4D_IO_CONFIG_HPP
