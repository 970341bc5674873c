// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Metric reports: JSON documents and aligned plain-text tables.

#ifndef M4D_METRICS_REPORT_HPP
#define M4D_METRICS_REPORT_HPP

#include <json.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "m4d/metrics/stats.hpp"

namespace m4d::metrics {

/// Per-modality evaluation summary.
struct ModalityReport {
  std::optional<double> miou;
  std::optional<double> jf;  // image only
  std::size_t nmp = 0;
  std::size_t records = 0;
};

inline constexpr std::uint32_t kReportVersion = 1;

namespace detail {
inline nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline std::string pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
  return buf;
}

/// Pads every column to its widest cell; first column left-aligned.
inline std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (w.size() <= i) w.push_back(0);
      w[i] = std::max(w[i], r[i].size());
    }
  std::string out;
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    const auto& r = rows[ri];
    for (std::size_t i = 0; i < r.size(); ++i) {
      const std::string pad(w[i] - r[i].size(), ' ');
      out += i == 0 ? r[i] + pad : "  " + pad + r[i];
    }
    out += "\n";
    if (ri == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < w.size(); ++i) total += w[i] + (i == 0 ? 0 : 2);
      out += std::string(total, '-') + "\n";
    }
  }
  return out;
}
}  // namespace detail

inline nlohmann::json modality_json(const ModalityReport& r) {
  return {{"miou", detail::opt(r.miou)}, {"jf", detail::opt(r.jf)}, {"nmp", r.nmp}, {"records", r.records}};
}

/// Image columns (mIoU, J&F, NMP) then LiDAR columns (mIoU, NMP), one row.
inline std::string evaluation_table(const std::string& label, const ModalityReport& image,
                                    const ModalityReport& lidar) {
  return detail::table({{"run", "img mIoU(%)", "img J&F(%)", "img NMP", "lidar mIoU(%)", "lidar NMP"},
                        {label, detail::pct(image.miou), detail::pct(image.jf), std::to_string(image.nmp),
                         detail::pct(lidar.miou), std::to_string(lidar.nmp)}});
}

inline nlohmann::json histogram_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}}; }

inline nlohmann::json dataset_json(const DatasetReport& r) {
  nlohmann::json co = nlohmann::json::object();
  for (const auto& [id, v] : r.co_occurrence) co[std::to_string(id)] = v;
  return {{"format", "m4d-dataset-report"}, {"version", kReportVersion}, {"masklets", r.masklets},
          {"masks_per_image", r.masks_per_image}, {"masks_per_scan", r.masks_per_scan},
          {"volume_histogram", histogram_json(r.volume)}, {"area_histogram", histogram_json(r.area)},
          {"score_histogram", histogram_json(r.score)}, {"unscored", r.unscored}, {"co_occurrence", co}};
}

inline std::string dataset_table(const DatasetReport& r) {
  char a[32];
  char b[32];
  std::snprintf(a, sizeof a, "%.3f", r.masks_per_image);
  std::snprintf(b, sizeof b, "%.3f", r.masks_per_scan);
  std::string out = detail::table({{"statistic", "value"},
                                   {"masklets", std::to_string(r.masklets)},
                                   {"masks per image", a},
                                   {"masks per scan", b},
                                   {"unscored masklets", std::to_string(r.unscored)}});
  auto hist = [&](const char* name, const Histogram& h) {
    std::vector<std::vector<std::string>> rows{{name, "count"}};
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "[%g, %g)", h.edges[i], h.edges[i + 1]);
      rows.push_back({buf, std::to_string(h.counts[i])});
    }
    out += "\n" + detail::table(rows);
  };
  hist("volume (voxels)", r.volume);
  hist("area (pixels)", r.area);
  hist("score", r.score);
  return out;
}

}  // namespace m4d::metrics

#endif  // M4D_METRICS_REPORT_HPP
