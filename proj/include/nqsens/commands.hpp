#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "nqsens/config.hpp"

namespace nqsens::commands {

// Command bodies behind the CLI verbs. Each returns 0 on success and throws
// on failure; the CLI maps std::invalid_argument to exit code 2 and any other
// exception to exit code 1. `log` receives human-readable progress, `out`
// receives the machine-readable result itself.

// Writes <out_dir>/ed.json with the sector spectrum and ground block.
int run_ed(const config::RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

// Trains every configured seed. Writes <out_dir>/config.json plus, per seed,
// trace_<seed>.csv, checkpoint_<seed>.json and report_<seed>.json, then an
// aggregate summary.json.
int run_train(const config::RunConfig& cfg, const std::filesystem::path& out_dir,
              std::ostream& log);

// Report for a saved checkpoint, as JSON on `out`. The ring couplings come
// from cfg, the site count from the checkpoint itself.
int run_diagnose(const config::RunConfig& cfg, const std::filesystem::path& checkpoint,
                 std::ostream& out);

// Writes <out_dir>/bench.csv: parameter counts and per-step cost estimates
// for one to six heads at the configured sizes.
int run_bench(const config::RunConfig& cfg, const std::filesystem::path& out_dir,
              std::ostream& log);

// Affine-rank report for a named analytic family (mg-momentum, mg-dimer,
// ed-ground) or for the head states of a checkpoint file, as JSON on `out`.
int run_rank(const config::RunConfig& cfg, const std::string& family, std::ostream& out);

// Cost-model quantities for the configured sizes, as JSON on `out`.
int run_cost(const config::RunConfig& cfg, std::ostream& out);

}  // namespace nqsens::commands
