// memeclust: command-line front end for the clustering pipeline.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

#include "memeclust/pipeline/config.hpp"
#include "memeclust/pipeline/pipeline.hpp"
#include "memeclust/pipeline/synthetic.hpp"
#include "memeclust/pipeline/task_server.hpp"

#include <CLI11.hpp>
#include <httplib.h>

namespace mp = memeclust::pipeline;

namespace {

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meme template clustering pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "JSON configuration file (defaults apply to missing keys)");

  // Every config leaf doubles as a flag: --adjacency.k=50, --clustering.algorithm=dbscan, ...
  const auto defaults = mp::default_config_json();
  std::map<std::string, std::string> overrides;
  for (const auto& key : mp::leaf_keys(defaults)) {
    app.add_option_function<std::string>(
           "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; },
           "config key " + key)
        ->group("Config overrides");
  }

  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic corpus with known template labels");
  mp::SyntheticSpec spec;
  std::string gen_out = "corpus";
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();
  gen->add_option("--templates", spec.n_templates)->capture_default_str();
  gen->add_option("--variants", spec.variants_per_template)->capture_default_str();
  gen->add_option("--family-size", spec.family_size)->capture_default_str();
  gen->add_option("--image-size", spec.image_size)->capture_default_str();
  gen->add_option("--seed", spec.seed)->capture_default_str();
  gen->add_option("--mix-caption", spec.mix.caption)->capture_default_str();
  gen->add_option("--mix-crop", spec.mix.crop)->capture_default_str();
  gen->add_option("--mix-recolor", spec.mix.recolor)->capture_default_str();
  gen->add_option("--mix-paste", spec.mix.paste)->capture_default_str();
  gen->add_option("--mix-face", spec.mix.face)->capture_default_str();

  auto* extract = app.add_subcommand("extract-native", "PHASH, colour histogram and SURF features");
  auto* adjacency = app.add_subcommand("build-adjacency", "One similarity matrix per feature file");
  auto* aggregate = app.add_subcommand("aggregate", "Sum feature matrices into dimension matrices");
  auto* identify = app.add_subcommand("identify-templates", "Filter and cluster to find templates");
  auto* match = app.add_subcommand("match", "Rank non-template images and cluster at each increment");
  auto* standard = app.add_subcommand("standard-baseline", "Direct clustering at each coverage target");
  auto* evaluate = app.add_subcommand("evaluate", "Consistency/entropy tables, task lists, judgment scores");
  auto* serve = app.add_subcommand("serve-tasks", "HTTP service for the two judgment tasks");
  auto* run = app.add_subcommand("run", "extract-native through evaluate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto corpus = mp::write_synthetic(spec, gen_out);
      std::printf("wrote %zu images to %s\n", corpus.manifest.size(), gen_out.c_str());
      return 0;
    }

    auto cfg_json = config_file.empty() ? defaults : mp::load_config_json(config_file);
    for (const auto& [key, value] : overrides) mp::set_dotted(cfg_json, key, value);
    const auto cfg = mp::config_from_json(cfg_json);
    const auto log = mp::stderr_log();

    if (extract->parsed()) mp::extract_native_stage(cfg, log);
    else if (adjacency->parsed()) mp::build_adjacency_stage(cfg, log);
    else if (aggregate->parsed()) mp::aggregate_stage(cfg, log);
    else if (identify->parsed()) mp::identify_templates_stage(cfg, cfg.matrix, log);
    else if (match->parsed()) mp::match_stage(cfg, cfg.matrix, log);
    else if (standard->parsed()) mp::standard_baseline_stage(cfg, cfg.matrix, log);
    else if (evaluate->parsed()) std::printf("%s\n", mp::evaluate_stage(cfg, cfg.matrix, log).dump(1).c_str());
    else if (run->parsed()) std::printf("%s\n", mp::run_all(cfg, log).dump(1).c_str());
    else if (serve->parsed()) {
      const auto manifest = mp::load_corpus(cfg);
      const auto tp = mp::tasks_path(cfg, cfg.matrix);
      if (!std::filesystem::exists(tp)) memeclust::eval::write_tasks(mp::make_tasks(cfg, cfg.matrix, manifest, log), tp);
      mp::TaskService service(memeclust::eval::read_tasks(tp), manifest, cfg.paths.manifest,
                              mp::judgments_path(cfg, cfg.matrix));
      httplib::Server server;
      service.bind(server);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      std::fprintf(stderr, "serving %s on http://%s:%d\n", tp.c_str(), cfg.host.c_str(), cfg.port);
      if (!server.listen(cfg.host, cfg.port)) {
        std::fprintf(stderr, "error: cannot listen on %s:%d\n", cfg.host.c_str(), cfg.port);
        return 1;
      }
    }
  } catch (const memeclust::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
