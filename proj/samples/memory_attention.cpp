// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// One multi-modal memory attention step: fill a small memory bank, then
// attend the current image and LiDAR tokens over it with ego-motion
// compensated position encodings.

#include <cstdio>
#include <random>

#include "m4d/memory/bank.hpp"
#include "m4d/memory/mcma.hpp"

namespace {

using namespace m4d;

memory::FeatureMap random_tokens(std::mt19937_64& rng, Modality m, int n, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> at(-10.0, 10.0);
  memory::FeatureMap fm;
  fm.modality = m;
  fm.tokens = Matrix::NullaryExpr(n, dim, [&](Eigen::Index, Eigen::Index) { return g(rng); });
  for (int i = 0; i < n; ++i) {
    fm.positions.emplace_back(at(rng), at(rng), 0.1 * at(rng));
    if (m == Modality::kImage) fm.pixels.emplace_back(32 + 2 * at(rng), 24 + at(rng));
  }
  return fm;
}

}  // namespace

int main() {
  constexpr int kDim = 16;
  std::mt19937_64 rng(3);
  const auto params = geometry::UmpeParams::seeded(kDim, 11);

  memory::MemoryBank bank(3, 1);
  for (int f = 0; f < 5; ++f) {
    memory::MemoryEntry e;
    e.frame = f;
    e.prompted = f == 0;
    const auto img = random_tokens(rng, Modality::kImage, 6, kDim);
    const auto lid = random_tokens(rng, Modality::kLidar, 8, kDim);
    e.image = memory::ModalMemory{img, img.tokens.colwise().mean().transpose()};
    e.lidar = memory::ModalMemory{lid, lid.tokens.colwise().mean().transpose()};
    bank.push(std::move(e));
  }
  std::printf("bank holds frames:");
  for (const auto& e : bank.entries()) std::printf(" %d%s", e.get().frame, e.get().prompted ? "(p)" : "");
  std::printf("\n");

  // The ego vehicle moved 1 m forward per frame since each stored frame.
  std::vector<geometry::Pose> motions;
  for (const auto& e : bank.entries())
    motions.push_back(geometry::Pose::from_translation(Vec3(5.0 - e.get().frame, 0.0, 0.0)));

  const auto image = random_tokens(rng, Modality::kImage, 6, kDim);
  const auto lidar = random_tokens(rng, Modality::kLidar, 8, kDim);
  const auto out = memory::mcma_forward(image, lidar, bank, motions, params);
  std::printf("image tokens %ldx%ld -> %ldx%ld, mean change %.4f\n", static_cast<long>(image.size()),
              static_cast<long>(image.dim()), static_cast<long>(out.image.size()), static_cast<long>(out.image.dim()),
              (out.image.tokens - image.tokens).cwiseAbs().mean());
  std::printf("lidar tokens %ldx%ld -> %ldx%ld, mean change %.4f\n", static_cast<long>(lidar.size()),
              static_cast<long>(lidar.dim()), static_cast<long>(out.lidar.size()), static_cast<long>(out.lidar.dim()),
              (out.lidar.tokens - lidar.tokens).cwiseAbs().mean());
  return 0;
}
