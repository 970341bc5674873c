// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: m4d <command> --manifest seq/manifest.json [--config engine.ini] [--set key=value ...]

#include "m4d/engine/service.hpp"
#include "m4d/engine/synthetic.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

namespace {

using namespace m4d;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string work_dir;
  std::optional<std::uint64_t> seed;

  io::EngineConfig load() const {
    io::EngineConfig cfg = config.empty() ? io::EngineConfig{} : io::load_config(config);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + kv + "'");
      io::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!work_dir.empty()) cfg.work_dir = work_dir;
    if (seed) {
      cfg.seed = *seed;
      cfg.oracle.seed = *seed;
    }
    io::validate_config(cfg);
    return cfg;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "INI config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "override a config key, e.g. --set fusion.eps=0.4");
  app->add_option("-w,--work-dir", c.work_dir, "artifact directory (overrides pipeline.work_dir)");
  app->add_option("--seed", c.seed, "seed for every random stage");
}

void write_or_print(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
  } else {
    io::write_file(out, text);
    std::cerr << "wrote " << out << "\n";
  }
}

void report(const std::string& stage, const std::filesystem::path& p, bool hit) {
  std::cout << stage << ": " << p.string() << (hit ? " (cached)" : "") << "\n";
}

volatile std::sig_atomic_t g_stop = 0;
httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masklet4d: cross-modal 4D masklet annotation engine"};
  app.require_subcommand(1);
  Common common;
  std::string manifest;
  std::string out;

  auto* synth = app.add_subcommand("synth", "write the synthetic test sequence");
  std::string synth_dir;
  double noise = 0.0;
  std::uint64_t synth_seed = 7;
  synth->add_option("-o,--out", synth_dir, "output directory")->required();
  synth->add_option("--noise", noise, "spurious mask pixels as a fraction of each mask")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--seed", synth_seed, "noise seed");

  auto* rec = app.add_subcommand("reconstruct", "manifest -> voxel grids");
  auto* ray = app.add_subcommand("raycast", "voxel grids -> pixel-voxel tables");
  auto* fuse = app.add_subcommand("fuse", "2D masklets + tables -> voxel/point masklets and scores");
  auto* stats = app.add_subcommand("stats", "dataset statistics report");
  auto* eval = app.add_subcommand("eval", "run an evaluation protocol");
  auto* serve = app.add_subcommand("serve", "HTTP review service");
  std::string json_dump;
  rec->add_option("--json", json_dump, "also write a JSON debug dump here");
  ray->add_option("--json", json_dump, "also write a JSON debug dump here");
  fuse->add_option("--scores", out, "copy the scores file here");
  stats->add_option("-o,--out", out, "write the JSON report here (default: stdout)");
  eval->add_option("-o,--out", out, "write the JSON report here (default: stdout)");

  std::string protocol;
  std::optional<double> iou_threshold;
  std::optional<int> budget;
  std::string oracle;
  eval->add_option("--protocol", protocol, "offline | online | semisupervised");
  eval->add_option("--iou-threshold", iou_threshold, "online re-prompt threshold");
  eval->add_option("--frame-budget", budget, "prompted frames per object");
  eval->add_option("--oracle", oracle, "perfect | noisy");

  std::vector<std::string> manifests;
  std::optional<int> port;
  serve->add_option("--port", port, "listen port (overrides service.port)");
  for (auto* sub : {rec, ray, fuse, stats, eval}) {
    sub->add_option("-m,--manifest", manifest, "sequence manifest")->required()->check(CLI::ExistingFile);
    add_common(sub, common);
  }
  serve->add_option("-m,--manifest", manifests, "sequence manifests")->required()->check(CLI::ExistingFile);
  add_common(serve, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      engine::SyntheticOptions opt;
      opt.noise_fraction = noise;
      opt.seed = synth_seed;
      engine::make_synthetic_scene(opt).write(synth_dir);
      std::cout << "synth: " << (std::filesystem::path(synth_dir) / "manifest.json").string() << "\n";
      return 0;
    }

    io::EngineConfig cfg = common.load();
    if (serve->parsed()) {
      if (port) cfg.service.port = *port;
      std::vector<engine::ServedSequence> seqs;
      for (const auto& m : manifests) seqs.push_back(engine::serve_sequence(m, cfg));
      engine::ReviewService svc(std::move(seqs), cfg.fusion, cfg.service.verdict_log);
      httplib::Server srv;
      svc.bind(srv);
      g_server = &srv;
      std::signal(SIGINT, [](int) {
        g_stop = 1;
        if (g_server) g_server->stop();
      });
      std::cout << "serving on http://" << cfg.service.host << ":" << cfg.service.port << "/api/v1/\n" << std::flush;
      if (!srv.listen(cfg.service.host, cfg.service.port)) {
        if (g_stop) return 0;
        std::cerr << "error: cannot listen on " << cfg.service.host << ":" << cfg.service.port << "\n";
        return 1;
      }
      return 0;
    }

    const engine::SequenceData data = engine::load_sequence(manifest);
    engine::CachedPipeline pipe(data, cfg);
    bool hit = false;
    const auto rc = pipe.reconstruction(&hit);
    if (rec->parsed()) {
      report("reconstruct", pipe.cache().path_for("reconstruct", pipe.reconstruct_key()), hit);
      if (!json_dump.empty()) io::write_file(json_dump, io::reconstruction_to_json(rc).dump(1) + "\n");
      return 0;
    }
    const auto table = pipe.table(rc, &hit);
    if (ray->parsed()) {
      report("raycast", pipe.cache().path_for("raycast", pipe.raycast_key()), hit);
      if (!json_dump.empty()) io::write_file(json_dump, io::table_to_json(table).dump(1) + "\n");
      return 0;
    }
    const auto result = engine::fuse_sequence(rc, table, data, cfg.fusion);
    if (fuse->parsed()) {
      for (const auto& [what, p] : pipe.write_fusion(result, cfg.fusion)) std::cout << what << ": " << p.string() << "\n";
      if (!out.empty()) io::write_file(out, engine::scores_json(result).dump(2) + "\n");
      return 0;
    }
    if (stats->parsed()) {
      const auto r = metrics::dataset_stats(engine::stats_input(data, result));
      std::cerr << metrics::dataset_table(r);
      write_or_print(out, metrics::dataset_json(r).dump(2) + "\n");
      return 0;
    }
    if (!protocol.empty()) cfg.eval.protocol = protocol;
    if (iou_threshold) cfg.protocol.iou_threshold = *iou_threshold;
    if (budget) cfg.protocol.frame_budget = *budget;
    if (!oracle.empty()) cfg.eval.oracle = oracle;
    io::validate_config(cfg);
    const auto seq = engine::protocol_sequence(data, result, cfg.eval.camera);
    const auto r = engine::run_protocol(seq, cfg);
    std::cerr << metrics::evaluation_table(r.protocol, r.image, r.lidar);
    write_or_print(out, engine::protocol_report_json(r, cfg, data.manifest.sequence_id).dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
