// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "m4d/protocol/click.hpp"
#include "m4d/protocol/protocols.hpp"
#include "oracles.hpp"
#include "protocol_fixture.hpp"

namespace {

using namespace m4d;
using namespace m4d::protocol;
using m4d::fixture::protocol_fixture;

const std::vector<std::int64_t> kAll;

class EmptyOracle final : public SegmenterOracle {
 public:
  [[nodiscard]] ObjectPrediction segment(const ProtocolSequence& seq, std::int64_t,
                                         std::span<const Prompt>) const override {
    ObjectPrediction p;
    for (int f = 0; f < seq.frames; ++f) {
      p.image.push_back(seq.domain(Modality::kImage, f).empty_mask());
      p.lidar.push_back(seq.domain(Modality::kLidar, f).empty_mask());
    }
    return p;
  }
};

class ThrowingOracle final : public SegmenterOracle {
 public:
  [[nodiscard]] ObjectPrediction segment(const ProtocolSequence&, std::int64_t,
                                         std::span<const Prompt>) const override {
    throw std::runtime_error("model offline");
  }
};

std::string trace_string(const std::map<std::int64_t, std::vector<int>>& t) {
  std::ostringstream os;
  for (const auto& [id, frames] : t) {
    os << id << ":";
    for (int f : frames) os << " " << f;
    os << ";";
  }
  return os.str();
}

Domain image_domain(int w, int h) {
  Domain d;
  d.width = w;
  d.height = h;
  return d;
}

// ---------------------------------------------------------------- clicks

TEST(Click, ColdStartGoesToGtInteriorMost) {
  const auto d = image_domain(12, 9);
  BinaryMask gt(12, 9);
  for (int v = 1; v < 8; ++v)
    for (int u = 2; u < 11; ++u) gt.set(u, v);
  const auto p = sample_click(d, d.empty_mask(), gt, 4);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->kind, PromptKind::kPositiveClick);
  EXPECT_EQ(p->frame, 4);
  const auto& c = std::get<Click>(p->payload);
  const int u = static_cast<int>(c.element % 12), v = static_cast<int>(c.element / 12);
  double best = 0.0;
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 12; ++x)
      if (gt.get(x, y)) best = std::max(best, oracle::brute_interior_distance(gt, x, y));
  EXPECT_DOUBLE_EQ(oracle::brute_interior_distance(gt, u, v), best);
  EXPECT_EQ(c.coord, Vec3(u, v, 0));
}

TEST(Click, ConvergedIsNoOp) {
  const auto d = image_domain(5, 5);
  BinaryMask gt(5, 5);
  gt.set(2, 2);
  EXPECT_FALSE(sample_click(d, gt, gt, 0).has_value());
  EXPECT_THROW(sample_click(d, gt, d.empty_mask(), 0), InvalidInput);
  EXPECT_THROW(sample_click(d, BinaryMask(4, 4), gt, 0), InvalidInput);
}

TEST(Click, LandsInLargestErrorBlobPerDistanceTransform) {
  for (int trial = 0; trial < 60; ++trial) {
    const auto [gt, pred] = oracle::crafted_mask_pair(static_cast<std::uint64_t>(trial) + 500);
    if (!gt.any()) continue;
    const auto d = image_domain(gt.width, gt.height);
    const auto p = sample_click(d, pred, gt, 0);
    if (gt == pred) {
      EXPECT_FALSE(p);
      continue;
    }
    ASSERT_TRUE(p);
    // Brute-force error components by flood fill over 4-neighbours.
    BinaryMask fn(gt.width, gt.height), fp(gt.width, gt.height);
    for (std::size_t i = 0; i < gt.bits.size(); ++i) {
      fn.bits[i] = gt.bits[i] && !pred.bits[i];
      fp.bits[i] = pred.bits[i] && !gt.bits[i];
    }
    auto blobs = [&](const BinaryMask& m) {
      std::vector<BinaryMask> out;
      BinaryMask seen(m.width, m.height);
      for (int v = 0; v < m.height; ++v)
        for (int u = 0; u < m.width; ++u) {
          if (!m.get(u, v) || seen.get(u, v)) continue;
          BinaryMask b(m.width, m.height);
          std::vector<std::pair<int, int>> st{{u, v}};
          seen.set(u, v);
          while (!st.empty()) {
            auto [x, y] = st.back();
            st.pop_back();
            b.set(x, y);
            const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4; ++k) {
              const int nx = x + dx[k], ny = y + dy[k];
              if (nx >= 0 && ny >= 0 && nx < m.width && ny < m.height && m.get(nx, ny) && !seen.get(nx, ny)) {
                seen.set(nx, ny);
                st.emplace_back(nx, ny);
              }
            }
          }
          out.push_back(b);
        }
      return out;
    };
    const auto fnb = blobs(fn), fpb = blobs(fp);
    std::size_t big_fn = 0, big_fp = 0;
    for (const auto& b : fnb) big_fn = std::max(big_fn, b.count());
    for (const auto& b : fpb) big_fp = std::max(big_fp, b.count());
    const bool positive = big_fn > 0 && big_fn >= big_fp;
    EXPECT_EQ(p->kind, positive ? PromptKind::kPositiveClick : PromptKind::kNegativeClick) << "trial " << trial;
    const auto& c = std::get<Click>(p->payload);
    const int u = static_cast<int>(c.element) % gt.width, v = static_cast<int>(c.element) / gt.width;
    const BinaryMask* home = nullptr;
    for (const auto& b : positive ? fnb : fpb)
      if (b.get(u, v)) home = &b;
    ASSERT_NE(home, nullptr);
    ASSERT_EQ(home->count(), positive ? big_fn : big_fp);
    double best = 0.0;
    for (int y = 0; y < gt.height; ++y)
      for (int x = 0; x < gt.width; ++x)
        if (home->get(x, y)) best = std::max(best, oracle::brute_interior_distance(*home, x, y));
    EXPECT_NEAR(oracle::brute_interior_distance(*home, u, v), best, 1e-12) << "trial " << trial;
  }
}

TEST(Click, LidarClickUsesPointDistances) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 9; ++i) pts.emplace_back(0.2 * i, 0.0, 0.0);
  Domain d;
  d.modality = Modality::kLidar;
  d.points = &pts;
  BinaryMask gt = BinaryMask::points(pts.size());
  for (int i = 1; i < 8; ++i) gt.bits[static_cast<std::size_t>(i)] = 1;
  const auto p = sample_click(d, d.empty_mask(), gt, 2);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->modality, Modality::kLidar);
  EXPECT_EQ(std::get<Click>(p->payload).element, 4u);
  EXPECT_EQ(std::get<Click>(p->payload).coord, pts[4]);
}

TEST(Prompt, ValidationChecksKindAndBounds) {
  const auto d = image_domain(4, 4);
  EXPECT_NO_THROW((Prompt{Modality::kImage, PromptKind::kPositiveClick, 0, Click{15, {}}}.validate(d)));
  EXPECT_THROW((Prompt{Modality::kImage, PromptKind::kPositiveClick, 0, Click{16, {}}}.validate(d)), InvalidInput);
  EXPECT_THROW((Prompt{Modality::kImage, PromptKind::kBox, 0, Click{1, {}}}.validate(d)), InvalidInput);
  EXPECT_THROW((Prompt{Modality::kImage, PromptKind::kBox, 0, Box{{0, 0, 0}, {4, 1, 0}}}.validate(d)), InvalidInput);
  EXPECT_THROW((Prompt{Modality::kLidar, PromptKind::kMask, 0, MaskPayload{d.empty_mask()}}.validate(d)),
               InvalidInput);
  BinaryMask m(4, 4);
  m.set(1, 2);
  m.set(3, 0);
  const auto b = bounding_box(d, m);
  EXPECT_EQ(b->lo, Vec3(1, 0, 0));
  EXPECT_EQ(b->hi, Vec3(3, 2, 0));
  EXPECT_FALSE(bounding_box(d, d.empty_mask()));
}

// ---------------------------------------------------------------- oracles

TEST(NoisyOracle, RateZeroIsPerfect) {
  const auto seq = protocol_fixture();
  const auto o = noisy_gt_oracle(5, 0.0);
  for (const auto& [id, gt] : seq.objects) {
    const auto p = o.segment(seq, id, {});
    EXPECT_EQ(p.image, gt.image);
    EXPECT_EQ(p.lidar, gt.lidar);
  }
}

TEST(NoisyOracle, FullDropEmptiesUnpromptedFrames) {
  const auto seq = protocol_fixture();
  const auto o = noisy_gt_oracle(5, 1.0, 1, CorruptionMode::kDrop);
  const std::vector<Prompt> prompts{Prompt{Modality::kImage, PromptKind::kPositiveClick, 3, Click{0, {}}}};
  const auto p = o.segment(seq, 1, prompts);
  for (int f = 0; f < seq.frames; ++f) {
    if (f == 3) {
      EXPECT_EQ(p.image[3], seq.objects.at(1).image[3]);
      EXPECT_EQ(p.lidar[3], seq.objects.at(1).lidar[3]);
    } else {
      EXPECT_FALSE(p.image[static_cast<std::size_t>(f)].any());
      EXPECT_FALSE(p.lidar[static_cast<std::size_t>(f)].any());
    }
  }
}

TEST(NoisyOracle, DeterministicPerSeed) {
  const auto seq = protocol_fixture();
  const auto a = noisy_gt_oracle(11, 0.5).segment(seq, 2, {});
  const auto b = noisy_gt_oracle(11, 0.5).segment(seq, 2, {});
  const auto c = noisy_gt_oracle(12, 0.5).segment(seq, 2, {});
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.lidar, b.lidar);
  EXPECT_TRUE(a.image != c.image || a.lidar != c.lidar);
  EXPECT_THROW(noisy_gt_oracle(1, 1.5), InvalidInput);
}

TEST(NoisyOracle, ShrinkKeepsCeilOfFloor) {
  const auto seq = protocol_fixture();
  NoiseConfig cfg;
  cfg.rate = 1.0;
  cfg.mode = CorruptionMode::kShrink;
  cfg.iou_floor = 0.5;
  const NoisyGtOracle o(cfg);
  const auto& gt = seq.objects.at(1).image[0];
  const auto m = o.corrupt(seq, 1, 0, Modality::kImage);
  EXPECT_EQ(m.count(), (gt.count() + 1) / 2);
  for (std::size_t i = 0; i < m.bits.size(); ++i)
    if (m.bits[i]) EXPECT_TRUE(gt.bits[i]);
}

// ---------------------------------------------------------------- protocols

void expect_perfect(const ProtocolResult& r) {
  ASSERT_TRUE(r.image.miou);
  ASSERT_TRUE(r.lidar.miou);
  EXPECT_DOUBLE_EQ(*r.image.miou, 1.0);
  EXPECT_DOUBLE_EQ(*r.lidar.miou, 1.0);
  EXPECT_DOUBLE_EQ(*r.image.jf, 1.0);
  EXPECT_EQ(r.image.nmp, 0u);
  EXPECT_EQ(r.lidar.nmp, 0u);
}

TEST(Offline, PerfectOracleOneRound) {
  const auto seq = protocol_fixture();
  ProtocolOptions opt;
  opt.frame_budget = 4;
  const auto r = run_offline(PerfectOracle{}, seq, kAll, opt);
  expect_perfect(r);
  EXPECT_EQ(r.prompted_frames.at(1), std::vector<int>{0});
  EXPECT_EQ(r.prompted_frames.at(2), std::vector<int>{2});
  EXPECT_EQ(r.round_sequence_iou, std::vector<double>{1.0});
  // Object 1 is present in both modalities at frame 0: one click each.
  int clicks = 0;
  for (const auto& e : r.prompts)
    if (e.object == 1) ++clicks;
  EXPECT_EQ(clicks, 2);
}

TEST(Offline, BudgetOneGivesOnePromptedFramePerObject) {
  const auto seq = protocol_fixture();
  const auto r = run_offline(noisy_gt_oracle(3, 0.6), seq, kAll, ProtocolOptions{});
  for (const auto& [id, frames] : r.prompted_frames) EXPECT_EQ(frames.size(), 1u);
}

TEST(Offline, SelectionMatchesReplay) {
  const auto seq = protocol_fixture(16);
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto o = noisy_gt_oracle(seed, 0.4);
    ProtocolOptions opt;
    opt.frame_budget = 5;
    const auto r = run_offline(o, seq, kAll, opt);
    EXPECT_EQ(r.prompted_frames, m4d::fixture::simulate_offline(o, seq, 5)) << "seed " << seed;
    for (const auto& [id, frames] : r.prompted_frames) EXPECT_LE(static_cast<int>(frames.size()), 5);
  }
}

TEST(Offline, MeanIouNonDecreasingAcrossRounds) {
  const auto seq = protocol_fixture(16);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ProtocolOptions opt;
    opt.frame_budget = 8;
    const auto r = run_offline(noisy_gt_oracle(seed, 0.5), seq, kAll, opt);
    for (std::size_t i = 1; i < r.round_prompted_iou.size(); ++i)
      EXPECT_GE(r.round_prompted_iou[i], r.round_prompted_iou[i - 1]) << "seed " << seed;
    for (std::size_t i = 1; i < r.round_sequence_iou.size(); ++i)
      EXPECT_GE(r.round_sequence_iou[i], r.round_sequence_iou[i - 1]) << "seed " << seed;
  }
}

TEST(Offline, OracleFailureCarriesRound) {
  const auto seq = protocol_fixture();
  try {
    (void)run_offline(ThrowingOracle{}, seq, kAll, ProtocolOptions{});
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("round 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("model offline"), std::string::npos);
  }
  ProtocolOptions bad;
  bad.frame_budget = 0;
  EXPECT_THROW(run_offline(PerfectOracle{}, seq, kAll, bad), InvalidInput);
}

TEST(Online, PerfectOraclePromptsOnlyFirstFrames) {
  const auto seq = protocol_fixture();
  ProtocolOptions opt;
  opt.frame_budget = 12;
  const auto r = run_online(PerfectOracle{}, seq, kAll, opt);
  expect_perfect(r);
  EXPECT_EQ(trace_string(r.prompted_frames), "1: 0;2: 2;3: 0;");
}

TEST(Online, EmptyOraclePromptsUntilBudget) {
  const auto seq = protocol_fixture();
  ProtocolOptions opt;
  opt.frame_budget = 5;
  const auto r = run_online(EmptyOracle{}, seq, kAll, opt);
  EXPECT_EQ(r.prompted_frames.at(1), (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(r.prompted_frames.at(2), (std::vector<int>{2, 3, 4, 5, 6}));
  opt.frame_budget = 100;
  const auto all = run_online(EmptyOracle{}, seq, kAll, opt);
  EXPECT_EQ(all.prompted_frames.at(1).size(), 12u);
  EXPECT_EQ(all.image.nmp + all.lidar.nmp, all.records.size());
}

TEST(Online, NoisyTraceMatchesHandReplay) {
  const auto seq = protocol_fixture(16);
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const auto o = noisy_gt_oracle(seed, 0.3);
    ProtocolOptions opt;
    opt.frame_budget = 4;
    const auto r = run_online(o, seq, kAll, opt);
    EXPECT_EQ(r.prompted_frames, m4d::fixture::simulate_online(o, seq, 0.75, 4)) << "seed " << seed;
  }
}

// Traces recorded for seed 2024, rate 0.3, 16 frames, budget 4. They pin the
// corruption stream and selection order; the replay tests above explain them.
TEST(Online, CommittedNoisyTrace) {
  const auto seq = protocol_fixture(16);
  ProtocolOptions opt;
  opt.frame_budget = 4;
  const auto r = run_online(noisy_gt_oracle(2024, 0.3), seq, kAll, opt);
  EXPECT_EQ(trace_string(r.prompted_frames), "1: 0 1 5 13;2: 2 3 6 7;3: 0 2 3 4;");
}

TEST(Offline, CommittedNoisyTrace) {
  const auto seq = protocol_fixture(16);
  ProtocolOptions opt;
  opt.frame_budget = 4;
  const auto r = run_offline(noisy_gt_oracle(2024, 0.3), seq, kAll, opt);
  EXPECT_EQ(trace_string(r.prompted_frames), "1: 0 1 14 5;2: 2 3 10 6;3: 0 3 6 11;");
}

TEST(Semisupervised, PerfectOracleEveryPromptKind) {
  const auto seq = protocol_fixture();
  for (auto kind : {SemiPrompt::kClick, SemiPrompt::kBox, SemiPrompt::kMask}) {
    const auto r = run_semisupervised(PerfectOracle{}, seq, kAll, kind, 1);
    expect_perfect(r);
    for (const auto& [id, frames] : r.prompted_frames) EXPECT_EQ(frames.size(), 1u);
  }
  EXPECT_THROW(run_semisupervised(PerfectOracle{}, seq, kAll, SemiPrompt::kClick, 0), InvalidInput);
}

TEST(Semisupervised, AbsentModalityHasNoRecords) {
  const auto seq = protocol_fixture();
  const std::vector<std::int64_t> only2{2};
  const auto r = run_semisupervised(PerfectOracle{}, seq, only2, SemiPrompt::kMask, 1);
  // Object 2: image frames 2..11, LiDAR frames 2..6.
  EXPECT_EQ(r.image.records, 10u);
  EXPECT_EQ(r.lidar.records, 5u);
  for (const auto& rec : r.records) EXPECT_EQ(rec.object, 2);
}

TEST(Semisupervised, ShrinkModelMatchesExpectation) {
  // Expected IoU per record: 1 on the prompted frame, otherwise
  // (1 - p) + p * ceil(0.5 n) / n for a ground truth of n elements.
  const auto seq = protocol_fixture(200);
  NoiseConfig cfg;
  cfg.seed = 77;
  cfg.rate = 0.1;
  cfg.mode = CorruptionMode::kShrink;
  cfg.iou_floor = 0.5;
  const auto r = run_semisupervised(NoisyGtOracle(cfg), seq, kAll, SemiPrompt::kMask, 1);
  for (Modality m : {Modality::kImage, Modality::kLidar}) {
    double expect = 0.0;
    std::size_t n = 0;
    for (const auto& [id, gt] : seq.objects) {
      const int first = r.prompted_frames.at(id).front();
      for (int f = 0; f < seq.frames; ++f) {
        const auto& g = gt.at(m, f);
        if (!g.any()) continue;
        const double c = static_cast<double>(g.count());
        expect += f == first ? 1.0 : (1.0 - cfg.rate) + cfg.rate * std::ceil(0.5 * c) / c;
        ++n;
      }
    }
    expect /= static_cast<double>(n);
    const auto& rep = m == Modality::kImage ? r.image : r.lidar;
    EXPECT_NEAR(*rep.miou, expect, 0.02) << to_string(m);
  }
}

}  // namespace
