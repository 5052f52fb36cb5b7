#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nqsens/commands.hpp"
#include "nqsens/config.hpp"

namespace {

void add_config_flags(CLI::App* cmd, std::string& config_path, std::string& preset_name) {
  auto* config_opt = cmd->add_option("--config", config_path, "JSON run configuration file")
                         ->check(CLI::ExistingFile);
  auto* preset_opt =
      cmd->add_option("--preset", preset_name, "built-in configuration: n4, n4b, n4c, n6, n8");
  config_opt->excludes(preset_opt);
  preset_opt->excludes(config_opt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-head neural quantum states on the frustrated Heisenberg ring"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir, family, checkpoint;
  std::uint64_t seed = 0;

  auto* ed = app.add_subcommand("ed", "exactly diagonalize the configured ring");
  add_config_flags(ed, config_path, preset_name);
  ed->add_option("--out", out_dir, "output directory (default .)");

  auto* train = app.add_subcommand("train", "train the ensemble for every configured seed");
  add_config_flags(train, config_path, preset_name);
  auto* seed_opt = train->add_option("--seed", seed, "train only this seed");
  train->add_option("--out", out_dir,
                    "run directory (default <output.directory>/<output.run_id>)");

  auto* diagnose = app.add_subcommand("diagnose", "report on a saved checkpoint");
  add_config_flags(diagnose, config_path, preset_name);
  diagnose->add_option("checkpoint", checkpoint, "checkpoint JSON file")
      ->required()
      ->check(CLI::ExistingFile);

  auto* bench = app.add_subcommand("bench", "tabulate parameter counts and step costs");
  add_config_flags(bench, config_path, preset_name);
  bench->add_option("--out", out_dir, "output directory (default .)");

  auto* rank = app.add_subcommand("rank", "affine-rank analysis of a state family");
  add_config_flags(rank, config_path, preset_name);
  rank->add_option("family", family,
                   "mg-momentum, mg-dimer, ed-ground, or a checkpoint path")
      ->required();

  auto* cost = app.add_subcommand("cost", "print the analytic cost model");
  add_config_flags(cost, config_path, preset_name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    nqsens::config::RunConfig cfg;
    if (!config_path.empty()) cfg = nqsens::config::load_config(config_path);
    else if (!preset_name.empty()) cfg = nqsens::config::preset(preset_name);
    if (*seed_opt) cfg.seeds = {seed};

    if (app.got_subcommand(train)) {
      const std::string dir = out_dir.empty() ? cfg.out_directory + "/" + cfg.run_id : out_dir;
      return nqsens::commands::run_train(cfg, dir, std::cout);
    }
    const std::string dir = out_dir.empty() ? "." : out_dir;
    if (app.got_subcommand(ed)) return nqsens::commands::run_ed(cfg, dir, std::cout);
    if (app.got_subcommand(diagnose))
      return nqsens::commands::run_diagnose(cfg, checkpoint, std::cout);
    if (app.got_subcommand(bench)) return nqsens::commands::run_bench(cfg, dir, std::cout);
    if (app.got_subcommand(rank)) return nqsens::commands::run_rank(cfg, family, std::cout);
    if (app.got_subcommand(cost)) return nqsens::commands::run_cost(cfg, std::cout);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
