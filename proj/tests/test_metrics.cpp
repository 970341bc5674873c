// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "m4d/metrics/losses.hpp"
#include "m4d/metrics/report.hpp"
#include "m4d/metrics/segmentation.hpp"
#include "m4d/metrics/stats.hpp"
#include "oracles.hpp"

namespace {

using namespace m4d;
using namespace m4d::metrics;

BinaryMask row_mask(int w, int first_on, int count) {
  BinaryMask m(w, 1);
  for (int i = first_on; i < first_on + count; ++i) m.set(i, 0);
  return m;
}

TEST(Iou, IdentityDisjointAndHandCount) {
  const auto a = row_mask(20, 0, 8);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, row_mask(20, 10, 5)), 0.0);
  // 8 + 8 with 6 shared: union 10.
  EXPECT_DOUBLE_EQ(iou(a, row_mask(20, 2, 8)), 0.6);
}

TEST(Iou, BothEmptyIsFlaggedOne) {
  const auto r = iou_detail(BinaryMask(3, 3), BinaryMask(3, 3));
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_TRUE(r.both_empty);
  EXPECT_THROW(iou(BinaryMask(3, 3), BinaryMask(3, 2)), InvalidInput);
}

TEST(Iou, SymmetricAndMonotone) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto [a, b] = oracle::crafted_mask_pair(seed);
    EXPECT_DOUBLE_EQ(iou(a, b), iou(b, a));
    EXPECT_DOUBLE_EQ(iou(a, b), oracle::brute_iou(a, b));
    // Adding a pixel to both never lowers IoU.
    const double before = iou(a, b);
    a.bits[0] = b.bits[0] = 1;
    EXPECT_GE(iou(a, b), before - 1e-15);
  }
}

TEST(Boundary, RadiusRule) {
  EXPECT_DOUBLE_EQ(boundary_radius(3.0, 100, 100), 3.0);
  // 0.008 * hypot(640, 480) = 6.4 -> 7
  EXPECT_DOUBLE_EQ(boundary_radius(0.008, 640, 480), 7.0);
  EXPECT_DOUBLE_EQ(boundary_radius(0.008, 30, 40), 1.0);
}

TEST(Boundary, MatchesNeighbourDefinition) {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto [a, b] = oracle::crafted_mask_pair(seed);
    EXPECT_EQ(boundary(a), oracle::brute_boundary(a));
    EXPECT_EQ(boundary(b), oracle::brute_boundary(b));
  }
}

TEST(JfScore, IdentityAndTotalMiss) {
  const auto [a, b] = oracle::crafted_mask_pair(7);
  (void)b;
  std::vector<BinaryMask> gt{a, a};
  const auto same = jf_score(gt, gt);
  EXPECT_DOUBLE_EQ(same.j, 1.0);
  EXPECT_DOUBLE_EQ(same.f, 1.0);
  EXPECT_DOUBLE_EQ(same.jf, 1.0);
  BinaryMask full(10, 10);
  for (auto& bit : full.bits) bit = 1;
  std::vector<BinaryMask> g2{full, full};
  std::vector<BinaryMask> p2{BinaryMask(10, 10), BinaryMask(10, 10)};
  const auto miss = jf_score(p2, g2);
  EXPECT_DOUBLE_EQ(miss.j, 0.0);
  EXPECT_DOUBLE_EQ(miss.f, 0.0);
  EXPECT_DOUBLE_EQ(miss.jf, 0.0);
}

TEST(JfScore, TwoFrameTrackMatchesExhaustiveOracle) {
  for (std::uint64_t seed = 200; seed < 230; ++seed) {
    const auto [a0, b0] = oracle::crafted_mask_pair(seed);
    const auto [a1, b1] = oracle::crafted_mask_pair(seed + 1000);
    std::vector<BinaryMask> pred{b0, b1};
    std::vector<BinaryMask> gt{a0, a1};
    for (double tol : {kDefaultBoundaryTolerance, 2.0, 3.5}) {
      const auto got = jf_score(pred, gt, tol);
      const double j = (oracle::brute_iou(b0, a0) + oracle::brute_iou(b1, a1)) / 2.0;
      const double f = (oracle::brute_boundary_f(b0, a0, boundary_radius(tol, a0.width, a0.height)) +
                        oracle::brute_boundary_f(b1, a1, boundary_radius(tol, a1.width, a1.height))) /
                       2.0;
      EXPECT_NEAR(got.j, j, 1e-9);
      EXPECT_NEAR(got.f, f, 1e-9);
      EXPECT_EQ(got.jf, (got.j + got.f) / 2.0);
      EXPECT_GE(got.jf, 0.0);
      EXPECT_LE(got.jf, 1.0);
    }
  }
}

TEST(JfScore, RejectsBadTracks) {
  std::vector<BinaryMask> none;
  EXPECT_THROW(jf_score(none, none), InvalidInput);
  std::vector<BinaryMask> one{BinaryMask(2, 2)};
  std::vector<BinaryMask> two{BinaryMask(2, 2), BinaryMask(2, 2)};
  EXPECT_THROW(jf_score(one, two), InvalidInput);
}

EvalRecord record(std::size_t shared, std::size_t gt_size, int frame = 0) {
  // gt covers gt_size points, pred covers `shared` of them.
  EvalRecord r;
  r.frame = frame;
  r.modality = Modality::kLidar;
  r.gt = BinaryMask::points(gt_size);
  r.pred = BinaryMask::points(gt_size);
  for (std::size_t i = 0; i < gt_size; ++i) r.gt.bits[i] = 1;
  for (std::size_t i = 0; i < shared; ++i) r.pred.bits[i] = 1;
  return r;
}

TEST(Nmp, ThresholdBoundary) {
  EXPECT_DOUBLE_EQ(kMismatchIou, 0.01);
  const auto low = record(99, 10000);   // IoU 0.0099
  const auto high = record(101, 10000); // IoU 0.0101
  EXPECT_TRUE(is_mismatch(low));
  EXPECT_FALSE(is_mismatch(high));
  const auto exact = record(100, 10000);
  EXPECT_FALSE(is_mismatch(exact));
}

TEST(Nmp, CountsOnlyPresentGroundTruth) {
  std::vector<EvalRecord> perfect{record(10, 10, 0), record(10, 10, 1)};
  EXPECT_EQ(nmp_count(perfect), 0u);
  std::vector<EvalRecord> empty{record(0, 10, 0), record(0, 10, 1), record(0, 10, 2)};
  EXPECT_EQ(nmp_count(empty), 3u);
  // IoUs 0.005, 0.02, 0.0
  std::vector<EvalRecord> crafted{record(1, 200), record(4, 200), record(0, 200)};
  EXPECT_EQ(nmp_count(crafted), 2u);
  EvalRecord absent;
  absent.gt = BinaryMask::points(5);
  absent.pred = BinaryMask::points(5);
  absent.gt_present = false;
  std::vector<EvalRecord> only_absent{absent};
  EXPECT_EQ(nmp_count(only_absent), 0u);
}

TEST(Nmp, MonotoneUnderDegradation) {
  std::mt19937_64 rng(5);
  std::vector<EvalRecord> recs;
  std::uniform_int_distribution<std::size_t> shared(0, 300);
  for (int i = 0; i < 50; ++i) recs.push_back(record(shared(rng), 300, i));
  std::size_t prev = nmp_count(recs);
  for (int step = 0; step < 300; ++step) {
    for (auto& r : recs) {
      auto idx = r.pred.indices();
      if (!idx.empty()) r.pred.bits[idx.back()] = 0;
    }
    const std::size_t now = nmp_count(recs);
    EXPECT_GE(now, prev);
    prev = now;
  }
  EXPECT_EQ(prev, recs.size());
}

TEST(MeanIou, PerModalityOverPresentGroundTruth) {
  std::vector<EvalRecord> recs{record(5, 10), record(10, 10)};
  recs.push_back(record(0, 10));
  recs.back().gt_present = false;
  EXPECT_DOUBLE_EQ(*mean_iou(recs, Modality::kLidar), 0.75);
  EXPECT_FALSE(mean_iou(recs, Modality::kImage).has_value());
}

TEST(FocalLoss, GammaZeroIsWeightedCrossEntropy) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  std::bernoulli_distribution b(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(64);
    std::vector<std::uint8_t> g(64);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = u(rng);
      g[i] = b(rng);
    }
    const double alpha = u(rng);
    double ce = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      ce += g[i] ? -alpha * std::log(p[i]) : -(1.0 - alpha) * std::log(1.0 - p[i]);
    ce /= static_cast<double>(p.size());
    EXPECT_NEAR(focal_loss(p, g, 0.0, alpha), ce, 1e-9);
    if (trial == 0) {
      double plain = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) plain += g[i] ? -std::log(p[i]) : -std::log(1.0 - p[i]);
      EXPECT_NEAR(focal_loss(p, g, 0.0, 0.5), 0.5 * plain / static_cast<double>(p.size()), 1e-9);
    }
  }
}

TEST(FocalLoss, FourElementHandCase) {
  // gamma 2, alpha 0.25:
  //   p=0.9 g=1: 0.25 * 0.1^2 * -ln 0.9
  //   p=0.2 g=0: 0.75 * 0.2^2 * -ln 0.8
  //   p=0.6 g=0: 0.75 * 0.6^2 * -ln 0.4
  //   p=0.3 g=1: 0.25 * 0.7^2 * -ln 0.3
  const std::vector<double> p{0.9, 0.2, 0.6, 0.3};
  const std::vector<std::uint8_t> g{1, 0, 0, 1};
  const double hand = (0.25 * 0.01 * -std::log(0.9) + 0.75 * 0.04 * -std::log(0.8) + 0.75 * 0.36 * -std::log(0.4) +
                       0.25 * 0.49 * -std::log(0.3)) /
                      4.0;
  EXPECT_NEAR(focal_loss(p, g, 2.0, 0.25), hand, 1e-9);
  EXPECT_NEAR(focal_loss(p, g, 2.0, 0.25), 0.10046071849112996, 1e-9);
}

TEST(FocalLoss, PerfectLimitAndRejection) {
  const std::vector<std::uint8_t> g{1, 0, 1};
  double prev = 1e9;
  for (double eps : {1e-1, 1e-2, 1e-4, 1e-8}) {
    const std::vector<double> p{1 - eps, eps, 1 - eps};
    const double l = focal_loss(p, g);
    EXPECT_LT(l, prev);
    prev = l;
  }
  EXPECT_LT(prev, 1e-15);
  const std::vector<double> bad{1.0, 0.0, 0.5};
  EXPECT_THROW(focal_loss(bad, g), InvalidInput);
  const std::vector<double> short_p{0.5};
  EXPECT_THROW(focal_loss(short_p, g), InvalidInput);
}

TEST(DiceLoss, IdentityInversionAndHand) {
  const std::vector<std::uint8_t> g{1, 1, 0, 0, 1};
  const std::vector<double> same{1, 1, 0, 0, 1};
  EXPECT_NEAR(dice_loss(same, g), 0.0, 1e-15);
  const std::vector<double> inv{0, 0, 1, 1, 0};
  // 1 - 1 / (2 + 3 + 1)
  EXPECT_NEAR(dice_loss(inv, g), 5.0 / 6.0, 1e-12);
  const std::vector<double> p{0.9, 0.2, 0.6, 0.3};
  const std::vector<std::uint8_t> g4{1, 0, 0, 1};
  // inter 1.2, sum p 2.0, sum g 2: 1 - 3.4 / 5.0
  EXPECT_NEAR(dice_loss(p, g4), 0.32, 1e-9);
  const std::vector<double> bad{1.5, 0, 0, 0, 0};
  EXPECT_THROW(dice_loss(bad, g), InvalidInput);
}

TEST(MaskLoss, WeightsAre20To1To1) {
  const LossWeights w;
  EXPECT_DOUBLE_EQ(w.focal, 20.0);
  EXPECT_DOUBLE_EQ(w.dice, 1.0);
  EXPECT_DOUBLE_EQ(w.iou, 1.0);
  const std::vector<double> p{0.9, 0.2, 0.6, 0.3};
  const std::vector<std::uint8_t> g{1, 0, 0, 1};
  const auto l = mask_loss(p, g, 0.8);
  // Thresholded prediction {1,0,1,0} vs {1,0,0,1}: IoU 1/3.
  EXPECT_NEAR(l.iou_l1, std::abs(0.8 - 1.0 / 3.0), 1e-12);
  EXPECT_NEAR(l.focal, focal_loss(p, g), 1e-15);
  EXPECT_NEAR(l.dice, dice_loss(p, g), 1e-15);
  EXPECT_NEAR(l.total, 20.0 * l.focal + l.dice + l.iou_l1, 1e-12);
  // Each term contributes linearly in its weight.
  const auto only_focal = mask_loss(p, g, 0.8, LossWeights{1, 0, 0});
  const auto only_dice = mask_loss(p, g, 0.8, LossWeights{0, 1, 0});
  const auto only_iou = mask_loss(p, g, 0.8, LossWeights{0, 0, 1});
  EXPECT_NEAR(l.total, 20 * only_focal.total + only_dice.total + only_iou.total, 1e-12);
}

TEST(DatasetStats, DirectCounts) {
  DatasetInput in;
  in.images = {{0, 0}};
  in.frame_count = 1;
  for (std::int64_t id : {1, 2, 3}) in.image_area[id][{0, 0}] = static_cast<std::size_t>(10 * id);
  const auto r = dataset_stats(in);
  EXPECT_EQ(r.masklets, 3u);
  EXPECT_DOUBLE_EQ(r.masks_per_image, 3.0);
  EXPECT_DOUBLE_EQ(r.masks_per_scan, 0.0);
}

TEST(DatasetStats, CoOccurrenceRatio) {
  DatasetInput in;
  in.frame_count = 8;
  for (int f = 0; f < 8; ++f) in.images.emplace_back(0, f);
  // Present in both modalities in frames 0..3, LiDAR only in 4..7.
  for (int f = 0; f < 4; ++f) in.image_area[9][{0, f}] = 5;
  for (int f = 0; f < 8; ++f) in.scan_points[9][f] = 12;
  const auto r = dataset_stats(in);
  EXPECT_DOUBLE_EQ(r.co_occurrence.at(9), 0.5);
  EXPECT_DOUBLE_EQ(r.masks_per_scan, 1.0);
  EXPECT_DOUBLE_EQ(r.masks_per_image, 0.5);
}

TEST(DatasetStats, HistogramsMatchRecount) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> area(1, 500), vol(1, 3000);
  std::uniform_real_distribution<double> sc(0.0, 1.0);
  std::bernoulli_distribution present(0.6);
  DatasetInput in;
  in.frame_count = 6;
  for (int c = 0; c < 2; ++c)
    for (int f = 0; f < 6; ++f) in.images.emplace_back(c, f);
  for (std::int64_t id = 0; id < 25; ++id) {
    for (const auto& img : in.images)
      if (present(rng)) in.image_area[id][img] = area(rng);
    for (int f = 0; f < 6; ++f)
      if (present(rng)) in.scan_points[id][f] = area(rng);
    in.volume[id] = vol(rng);
    in.score[id] = id % 7 == 0 ? std::nullopt : std::optional(sc(rng));
  }
  const auto r = dataset_stats(in);

  std::size_t masks = 0, scans = 0, unscored = 0;
  std::vector<std::size_t> score_bins(10, 0);
  for (const auto& [id, m] : in.image_area) masks += m.size();
  for (const auto& [id, m] : in.scan_points) scans += m.size();
  for (const auto& [id, s] : in.score) {
    if (!s) {
      ++unscored;
      continue;
    }
    ++score_bins[std::min<std::size_t>(9, static_cast<std::size_t>(*s * 10))];
  }
  EXPECT_DOUBLE_EQ(r.masks_per_image, static_cast<double>(masks) / 12.0);
  EXPECT_DOUBLE_EQ(r.masks_per_scan, static_cast<double>(scans) / 6.0);
  EXPECT_EQ(r.unscored, unscored);
  EXPECT_EQ(r.score.counts, score_bins);

  // Volume bins are [2^k, 2^(k+1)).
  std::map<int, std::size_t> vbins;
  for (const auto& [id, v] : in.volume) ++vbins[static_cast<int>(std::floor(std::log2(static_cast<double>(v))))];
  for (const auto& [k, n] : vbins) EXPECT_EQ(r.volume.counts.at(static_cast<std::size_t>(k)), n) << "bin " << k;
  std::size_t total_area = 0;
  for (auto n : r.area.counts) total_area += n;
  EXPECT_EQ(total_area, masks);

  for (const auto& [id, per_image] : in.image_area) {
    std::set<int> img, both;
    for (const auto& [k, a] : per_image) img.insert(k.second);
    std::set<int> either = img;
    if (in.scan_points.count(id))
      for (const auto& [f, n] : in.scan_points.at(id)) {
        either.insert(f);
        if (img.count(f)) both.insert(f);
      }
    EXPECT_DOUBLE_EQ(r.co_occurrence.at(id), static_cast<double>(both.size()) / static_cast<double>(either.size()));
  }
}

TEST(Report, JsonAndTableShape) {
  ModalityReport img{0.5, 0.75, 2, 10};
  ModalityReport lidar{0.25, std::nullopt, 1, 10};
  const auto j = modality_json(lidar);
  EXPECT_TRUE(j["jf"].is_null());
  EXPECT_DOUBLE_EQ(j["miou"].get<double>(), 0.25);
  const auto t = evaluation_table("offline", img, lidar);
  EXPECT_NE(t.find("img J&F(%)"), std::string::npos);
  EXPECT_NE(t.find("75.0"), std::string::npos);
  EXPECT_NE(t.find("25.0"), std::string::npos);
  DatasetInput in;
  in.images = {{0, 0}};
  in.frame_count = 1;
  in.image_area[1][{0, 0}] = 3;
  const auto dj = dataset_json(dataset_stats(in));
  EXPECT_EQ(dj["format"], "m4d-dataset-report");
  EXPECT_DOUBLE_EQ(dj["masks_per_image"].get<double>(), 1.0);
}

}  // namespace
