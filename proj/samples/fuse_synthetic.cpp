// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Builds the synthetic sequence, fuses its 2D masklets into voxel and point
// masklets, and prints one line per fused masklet.
//
//   sample_fuse_synthetic [noise-fraction] [output-dir]

#include <cstdio>
#include <cstdlib>
#include <exception>

#include "m4d/engine/synthetic.hpp"

int main(int argc, char** argv) {
  using namespace m4d;
  try {
    engine::SyntheticOptions opt;
    if (argc > 1) opt.noise_fraction = std::atof(argv[1]);
    const auto scene = engine::make_synthetic_scene(opt);
    if (argc > 2) scene.write(argv[2]);

    const io::ReconConfig cfg;
    const auto& d = scene.data;
    const auto rc = engine::reconstruct(d.manifest, d.scans, cfg);
    const auto table = engine::raycast_all(rc, d.manifest, cfg);
    const auto result = engine::fuse_sequence(rc, table, d, fusion::FusionParams{});

    std::printf("%zu frames, %zu cameras, %zu noise pixels\n", d.scans.size(), d.manifest.cameras.size(),
                scene.injected_pixels);
    for (const auto& m : result.masklets) {
      std::size_t points = 0;
      for (const auto& [f, idx] : m.points.frames) points += idx.size();
      std::printf("masklet %lld  sources %zu  voxels %zu  points %zu  score %s\n",
                  static_cast<long long>(m.voxels.id), m.sources.size(), m.voxels.voxels.size(), points,
                  m.score.score ? std::to_string(*m.score.score).c_str() : "none");
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
