// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Runs the three interaction protocols on a toy two-object sequence with a
// perfect oracle and with a seeded noisy one.

#include <cstdio>

#include "m4d/protocol/protocols.hpp"

namespace {

using namespace m4d;

// A square drifting right over a 24x16 image, and a lattice scan whose
// points under the square belong to it (pixel u = 4 x).
protocol::ProtocolSequence toy_sequence() {
  protocol::ProtocolSequence s;
  s.id = "toy";
  s.frames = 8;
  s.width = 24;
  s.height = 16;
  for (int f = 0; f < s.frames; ++f) {
    std::vector<Vec3> scan;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 6; ++x) scan.emplace_back(x, y, 0.0);
    s.scans.push_back(scan);
  }
  for (std::int64_t id : {1, 2}) {
    protocol::ObjectTruth t;
    for (int f = 0; f < s.frames; ++f) {
      const int u0 = id == 1 ? f : 16 - f;
      const int v0 = id == 1 ? 2 : 9;
      BinaryMask img(s.width, s.height);
      for (int v = v0; v < v0 + 5; ++v)
        for (int u = u0; u < u0 + 6; ++u) img.set(u, v);
      BinaryMask pts = BinaryMask::points(s.scans[static_cast<std::size_t>(f)].size());
      for (std::size_t i = 0; i < pts.bits.size(); ++i) {
        const Vec3& p = s.scans[static_cast<std::size_t>(f)][i];
        pts.bits[i] = img.get(static_cast<int>(p.x() * 4), static_cast<int>(p.y() * 4)) ? 1 : 0;
      }
      t.image.push_back(img);
      t.lidar.push_back(pts);
    }
    s.objects.emplace(id, t);
  }
  return s;
}

void report(const char* label, const protocol::ProtocolResult& r) {
  std::printf("%-28s image mIoU %.3f  lidar mIoU %.3f  NMP %zu/%zu  prompted:", label, r.image.miou.value_or(0.0),
              r.lidar.miou.value_or(0.0), r.image.nmp, r.lidar.nmp);
  for (const auto& [id, frames] : r.prompted_frames) {
    std::printf(" %lld[", static_cast<long long>(id));
    for (std::size_t i = 0; i < frames.size(); ++i) std::printf(i ? " %d" : "%d", frames[i]);
    std::printf("]");
  }
  std::printf("\n");
}

}  // namespace

int main() {
  const auto seq = toy_sequence();
  const std::vector<std::int64_t> all;
  protocol::ProtocolOptions opt;
  opt.frame_budget = 3;

  const protocol::PerfectOracle perfect;
  report("offline, perfect", protocol::run_offline(perfect, seq, all, opt));
  report("online, perfect", protocol::run_online(perfect, seq, all, opt));
  report("semi-supervised box, perfect",
         protocol::run_semisupervised(perfect, seq, all, protocol::SemiPrompt::kBox, 1, opt));

  const auto noisy = protocol::noisy_gt_oracle(42, 0.5);
  const auto off = protocol::run_offline(noisy, seq, all, opt);
  report("offline, noisy", off);
  std::printf("  prompted-frame IoU by round:");
  for (double v : off.round_prompted_iou) std::printf(" %.3f", v);
  std::printf("\n");
  report("online, noisy", protocol::run_online(noisy, seq, all, opt));
  return 0;
}
