// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Interactive and semi-supervised evaluation loops.

#ifndef M4D_PROTOCOL_PROTOCOLS_HPP
#define M4D_PROTOCOL_PROTOCOLS_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "m4d/metrics/report.hpp"
#include "m4d/metrics/segmentation.hpp"
#include "m4d/protocol/click.hpp"
#include "m4d/protocol/oracle.hpp"

namespace m4d::protocol {

/// An oracle call failed; the message carries protocol, round and object.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProtocolOptions {
  int clicks_per_prompt = 3;
  int frame_budget = 1;       // prompted frames per object
  double iou_threshold = 0.75;  // online only
  double link_radius = kDefaultLidarLinkRadius;
  double boundary_tolerance = metrics::kDefaultBoundaryTolerance;

  void validate() const {
    if (clicks_per_prompt < 1) throw InvalidInput("ProtocolOptions: clicks_per_prompt must be >= 1");
    if (frame_budget < 1) throw InvalidInput("ProtocolOptions: frame_budget must be >= 1");
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0))
      throw InvalidInput("ProtocolOptions: iou_threshold must be in [0, 1]");
  }
};

struct PromptEvent {
  int round = 0;
  std::int64_t object = 0;
  Prompt prompt;
};

using metrics::ModalityReport;

struct ProtocolResult {
  std::string protocol;
  ProtocolOptions options;
  std::vector<PromptEvent> prompts;
  std::map<std::int64_t, std::vector<int>> prompted_frames;  // in prompting order
  /// Mean IoU over the frames prompted so far, after each round.
  std::vector<double> round_prompted_iou;
  /// Mean IoU over all present (object, frame, modality) after each round.
  std::vector<double> round_sequence_iou;
  std::vector<metrics::EvalRecord> records;
  ModalityReport image;
  ModalityReport lidar;
};

enum class SemiPrompt : std::uint8_t { kClick, kBox, kMask };

namespace detail {

struct IouSum {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double x) {
    sum += x;
    ++n;
  }
  [[nodiscard]] double mean() const { return n == 0 ? 1.0 : sum / static_cast<double>(n); }
};

/// Lowest per-modality IoU at `frame` over modalities where the object is
/// present, and that modality (ties: image). Nothing if absent.
inline std::optional<std::pair<double, Modality>> frame_iou(const ObjectTruth& gt, const ObjectPrediction& pred,
                                                            int frame) {
  std::optional<std::pair<double, Modality>> out;
  for (Modality m : {Modality::kImage, Modality::kLidar}) {
    if (!gt.present(m, frame)) continue;
    const double v = metrics::iou(pred.at(m, frame), gt.at(m, frame));
    if (!out || v < out->first) out = std::pair{v, m};
  }
  return out;
}

inline void add_frame(IouSum& s, const ObjectTruth& gt, const ObjectPrediction& pred, int frame) {
  for (Modality m : {Modality::kImage, Modality::kLidar})
    if (gt.present(m, frame)) s.add(metrics::iou(pred.at(m, frame), gt.at(m, frame)));
}

inline ObjectPrediction empty_prediction(const ProtocolSequence& seq) {
  ObjectPrediction p;
  for (int f = 0; f < seq.frames; ++f) {
    p.image.push_back(seq.domain(Modality::kImage, f).empty_mask());
    p.lidar.push_back(seq.domain(Modality::kLidar, f).empty_mask());
  }
  return p;
}

inline std::optional<int> first_present(const ObjectTruth& gt, int frames) {
  for (int f = 0; f < frames; ++f)
    if (gt.present(f)) return f;
  return std::nullopt;
}

/// Shared per-object loop state.
struct Session {
  const ProtocolSequence& seq;
  const SegmenterOracle& oracle;
  const ProtocolOptions& opt;
  ProtocolResult& result;
  std::int64_t object;
  const ObjectTruth& gt;
  ObjectPrediction pred;
  std::vector<Prompt> prompts;
  int round = 0;
  int keep_before = 0;  // frames below this keep their prediction on re-segmentation

  void resegment() {
    ObjectPrediction out;
    try {
      out = oracle.segment(seq, object, prompts);
    } catch (const std::exception& e) {
      throw ProtocolError(result.protocol + ": oracle failed in round " + std::to_string(round) + " for object " +
                          std::to_string(object) + ": " + e.what());
    }
    if (out.image.size() != pred.image.size() || out.lidar.size() != pred.lidar.size())
      throw ProtocolError(result.protocol + ": oracle returned wrong frame count in round " + std::to_string(round) +
                          " for object " + std::to_string(object));
    for (int f = keep_before; f < seq.frames; ++f) {
      pred.image[static_cast<std::size_t>(f)] = std::move(out.image[static_cast<std::size_t>(f)]);
      pred.lidar[static_cast<std::size_t>(f)] = std::move(out.lidar[static_cast<std::size_t>(f)]);
    }
  }

  void add_prompt(Prompt p) {
    p.validate(seq.domain(p.modality, p.frame));
    result.prompts.push_back({round, object, p});
    prompts.push_back(std::move(p));
  }

  /// Up to `n` corrective clicks on (frame, modality), re-segmenting after each.
  void clicks(int frame, Modality m, int n) {
    const Domain d = seq.domain(m, frame);
    for (int k = 0; k < n; ++k) {
      auto p = sample_click(d, pred.at(m, frame), gt.at(m, frame), frame, opt.link_radius);
      if (!p) break;
      add_prompt(std::move(*p));
      resegment();
    }
  }

  /// First prompt on an object: one click in every modality present at
  /// `frame` before any re-segmentation, then the remaining clicks per
  /// modality. A perfect segmenter therefore still gets a dual-modality prompt.
  void opening_clicks(int frame, int n) {
    bool any = false;
    for (Modality m : {Modality::kImage, Modality::kLidar}) {
      if (!gt.present(m, frame)) continue;
      auto p = sample_click(seq.domain(m, frame), pred.at(m, frame), gt.at(m, frame), frame, opt.link_radius);
      if (!p) continue;
      add_prompt(std::move(*p));
      any = true;
    }
    if (any) resegment();
    for (Modality m : {Modality::kImage, Modality::kLidar})
      if (gt.present(m, frame)) clicks(frame, m, n - 1);
  }

  void mark_prompted(int frame) { result.prompted_frames[object].push_back(frame); }

  [[nodiscard]] IouSum prompted_iou() const {
    IouSum s;
    for (int f : result.prompted_frames[object]) add_frame(s, gt, pred, f);
    return s;
  }
  [[nodiscard]] IouSum sequence_iou() const {
    IouSum s;
    for (int f = 0; f < seq.frames; ++f) add_frame(s, gt, pred, f);
    return s;
  }
};

inline void finalize(ProtocolResult& result, const ProtocolSequence& seq,
                     const std::map<std::int64_t, ObjectPrediction>& preds) {
  std::vector<double> jf;
  for (const auto& [id, pred] : preds) {
    const ObjectTruth& gt = seq.objects.at(id);
    std::vector<BinaryMask> pt;
    std::vector<BinaryMask> gtt;
    for (int f = 0; f < seq.frames; ++f) {
      for (Modality m : {Modality::kImage, Modality::kLidar}) {
        if (!gt.present(m, f)) continue;
        metrics::EvalRecord r;
        r.object = id;
        r.frame = f;
        r.modality = m;
        r.pred = pred.at(m, f);
        r.gt = gt.at(m, f);
        r.pred_present = r.pred.any();
        result.records.push_back(std::move(r));
        if (m == Modality::kImage) {
          pt.push_back(pred.at(m, f));
          gtt.push_back(gt.at(m, f));
        }
      }
    }
    if (!pt.empty()) jf.push_back(metrics::jf_score(pt, gtt, result.options.boundary_tolerance).jf);
  }
  for (Modality m : {Modality::kImage, Modality::kLidar}) {
    ModalityReport& rep = m == Modality::kImage ? result.image : result.lidar;
    rep.miou = metrics::mean_iou(result.records, m);
    for (const auto& r : result.records) {
      if (r.modality != m) continue;
      ++rep.records;
      if (metrics::is_mismatch(r)) ++rep.nmp;
    }
  }
  if (!jf.empty()) {
    double s = 0.0;
    for (double x : jf) s += x;
    result.image.jf = s / static_cast<double>(jf.size());
  }
}

inline std::vector<std::int64_t> resolve_objects(const ProtocolSequence& seq, std::span<const std::int64_t> objects) {
  std::vector<std::int64_t> out(objects.begin(), objects.end());
  if (out.empty())
    for (const auto& [id, t] : seq.objects) out.push_back(id);
  for (auto id : out)
    if (!seq.objects.count(id)) throw InvalidInput("protocol: unknown object " + std::to_string(id));
  return out;
}

/// Combines per-object per-round IoU sums; objects that stopped early keep
/// their last value.
inline std::vector<double> combine_rounds(const std::vector<std::vector<IouSum>>& per_object) {
  std::size_t rounds = 0;
  for (const auto& v : per_object) rounds = std::max(rounds, v.size());
  std::vector<double> out;
  for (std::size_t r = 0; r < rounds; ++r) {
    IouSum total;
    for (const auto& v : per_object) {
      if (v.empty()) continue;
      const IouSum& s = v[std::min(r, v.size() - 1)];
      total.sum += s.sum;
      total.n += s.n;
    }
    out.push_back(total.mean());
  }
  return out;
}

}  // namespace detail

/**
 * Round 1 clicks the first frame where each object appears, in every modality
 * it is present in. Each later round clicks the unprompted frame with the
 * lowest IoU (ties: earliest) in its poorer modality. Stops at the frame
 * budget or once every frame is exact.
 */
inline ProtocolResult run_offline(const SegmenterOracle& oracle, const ProtocolSequence& seq,
                                  std::span<const std::int64_t> objects, const ProtocolOptions& opt) {
  opt.validate();
  seq.validate();
  ProtocolResult result;
  result.protocol = "offline";
  result.options = opt;
  std::map<std::int64_t, ObjectPrediction> preds;
  std::vector<std::vector<detail::IouSum>> prompted_rounds;
  std::vector<std::vector<detail::IouSum>> sequence_rounds;
  for (auto id : detail::resolve_objects(seq, objects)) {
    const ObjectTruth& gt = seq.objects.at(id);
    detail::Session s{seq, oracle, opt, result, id, gt, detail::empty_prediction(seq), {}, 1, 0};
    const auto first = detail::first_present(gt, seq.frames);
    if (!first) {
      preds.emplace(id, std::move(s.pred));
      continue;
    }
    s.opening_clicks(*first, opt.clicks_per_prompt);
    s.mark_prompted(*first);
    s.resegment();
    prompted_rounds.emplace_back(1, s.prompted_iou());
    sequence_rounds.emplace_back(1, s.sequence_iou());

    while (static_cast<int>(result.prompted_frames[id].size()) < opt.frame_budget) {
      const auto& done = result.prompted_frames[id];
      std::optional<std::pair<int, std::pair<double, Modality>>> pick;
      for (int f = 0; f < seq.frames; ++f) {
        if (std::find(done.begin(), done.end(), f) != done.end()) continue;
        const auto fi = detail::frame_iou(gt, s.pred, f);
        if (fi && (!pick || fi->first < pick->second.first)) pick = std::pair{f, *fi};
      }
      if (!pick || pick->second.first >= 1.0) break;
      ++s.round;
      s.clicks(pick->first, pick->second.second, opt.clicks_per_prompt);
      s.mark_prompted(pick->first);
      prompted_rounds.back().push_back(s.prompted_iou());
      sequence_rounds.back().push_back(s.sequence_iou());
    }
    preds.emplace(id, std::move(s.pred));
  }
  result.round_prompted_iou = detail::combine_rounds(prompted_rounds);
  result.round_sequence_iou = detail::combine_rounds(sequence_rounds);
  detail::finalize(result, seq, preds);
  return result;
}

/**
 * One forward pass. At each frame where the object is present and its IoU is
 * below the threshold, clicks are added (both modalities on the first prompt,
 * the poorer one afterwards) and frames from here on are re-segmented.
 * Earlier frames keep their predictions.
 */
inline ProtocolResult run_online(const SegmenterOracle& oracle, const ProtocolSequence& seq,
                                 std::span<const std::int64_t> objects, const ProtocolOptions& opt) {
  opt.validate();
  seq.validate();
  ProtocolResult result;
  result.protocol = "online";
  result.options = opt;
  std::map<std::int64_t, ObjectPrediction> preds;
  std::vector<std::vector<detail::IouSum>> prompted_rounds;
  std::vector<std::vector<detail::IouSum>> sequence_rounds;
  for (auto id : detail::resolve_objects(seq, objects)) {
    const ObjectTruth& gt = seq.objects.at(id);
    detail::Session s{seq, oracle, opt, result, id, gt, detail::empty_prediction(seq), {}, 0, 0};
    prompted_rounds.emplace_back();
    sequence_rounds.emplace_back();
    for (int f = 0; f < seq.frames; ++f) {
      const auto fi = detail::frame_iou(gt, s.pred, f);
      if (!fi || fi->first >= opt.iou_threshold) continue;
      if (static_cast<int>(result.prompted_frames[id].size()) >= opt.frame_budget) break;
      ++s.round;
      s.keep_before = f;
      if (s.prompts.empty()) {
        s.opening_clicks(f, opt.clicks_per_prompt);
      } else {
        s.clicks(f, fi->second, opt.clicks_per_prompt);
      }
      s.mark_prompted(f);
      prompted_rounds.back().push_back(s.prompted_iou());
      sequence_rounds.back().push_back(s.sequence_iou());
    }
    preds.emplace(id, std::move(s.pred));
  }
  result.round_prompted_iou = detail::combine_rounds(prompted_rounds);
  result.round_sequence_iou = detail::combine_rounds(sequence_rounds);
  detail::finalize(result, seq, preds);
  return result;
}

/// Prompts only the first frame of each object, in every modality present
/// there, then propagates once over the whole sequence.
inline ProtocolResult run_semisupervised(const SegmenterOracle& oracle, const ProtocolSequence& seq,
                                         std::span<const std::int64_t> objects, SemiPrompt kind, int n_clicks,
                                         const ProtocolOptions& opt = {}) {
  opt.validate();
  seq.validate();
  if (kind == SemiPrompt::kClick && n_clicks < 1) throw InvalidInput("run_semisupervised: n_clicks must be >= 1");
  ProtocolResult result;
  result.protocol = "semisupervised";
  result.options = opt;
  result.options.frame_budget = 1;
  std::map<std::int64_t, ObjectPrediction> preds;
  for (auto id : detail::resolve_objects(seq, objects)) {
    const ObjectTruth& gt = seq.objects.at(id);
    detail::Session s{seq, oracle, opt, result, id, gt, detail::empty_prediction(seq), {}, 1, 0};
    const auto first = detail::first_present(gt, seq.frames);
    if (first && kind == SemiPrompt::kClick) {
      s.opening_clicks(*first, n_clicks);
    } else if (first) {
      for (Modality m : {Modality::kImage, Modality::kLidar}) {
        if (!gt.present(m, *first)) continue;
        const Domain d = seq.domain(m, *first);
        if (kind == SemiPrompt::kBox) {
          s.add_prompt(Prompt{m, PromptKind::kBox, *first, *bounding_box(d, gt.at(m, *first))});
        } else {
          s.add_prompt(Prompt{m, PromptKind::kMask, *first, MaskPayload{gt.at(m, *first)}});
        }
      }
      s.resegment();
    }
    if (first) s.mark_prompted(*first);
    preds.emplace(id, std::move(s.pred));
  }
  detail::finalize(result, seq, preds);
  return result;
}

}  // namespace m4d::protocol

#endif  // M4D_PROTOCOL_PROTOCOLS_HPP
