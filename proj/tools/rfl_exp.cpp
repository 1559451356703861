// Experiment command line: run, summarize, replay.

#include <rfl/runner/runner.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace rfl::runner;
  CLI::App app{"Robust device selection experiments"};
  app.require_subcommand(1);

  std::string config;
  std::string output_dir;
  int jobs = 1;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "run every grid point and realization of a config");
  run->add_option("config", config, "JSON experiment config")->required();
  run->add_option("--jobs,-j", jobs, "parallel tasks")->check(CLI::PositiveNumber);
  run->add_option("--output-dir,-o", output_dir, "output directory (overrides RFL_OUTPUT_DIR and the config)");
  run->add_flag("--quiet,-q", quiet, "no per-task progress");

  std::string path;
  auto* summarize = app.add_subcommand("summarize", "means and standard errors per grid point");
  summarize->add_option("path", path, "result directory or CSV file")->required();

  std::uint64_t seed = 0;
  int point = 0;
  auto* replay_cmd = app.add_subcommand("replay", "recompute the rows of one realization");
  replay_cmd->add_option("config", config, "JSON experiment config")->required();
  replay_cmd->add_option("--seed", seed, "realization seed (the CSV seed column)")->required();
  replay_cmd->add_option("--point", point, "grid point index")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const ExperimentConfig cfg = load_config(config);
      RunOptions opt;
      opt.jobs = jobs;
      opt.output_dir = output_dir;
      opt.progress = !quiet;
      const RunReport rep = run_experiment(cfg, opt);
      for (const auto& f : rep.files) std::cout << f << '\n';
      std::cout << rep.manifest << '\n';
      if (!rep.ok()) {
        std::cerr << rep.failed << " of " << rep.tasks << " tasks failed; see " << rep.manifest << '\n';
        return 1;
      }
    } else if (*summarize) {
      for (const auto& f : summarize_path(path)) std::cout << f << '\n';
    } else if (*replay_cmd) {
      write_csv(std::cout, replay(load_config(config), seed, point));
    }
  } catch (const ConfigParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
