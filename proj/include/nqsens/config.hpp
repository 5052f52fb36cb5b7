#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nqsens/model.hpp"
#include "nqsens/nqs.hpp"
#include "nqsens/sampler.hpp"
#include "nqsens/trainer.hpp"

namespace nqsens::config {

// Everything a run needs: physical ring, ensemble shape, sampler settings,
// training schedule, the seed list, and where the outputs go.
struct RunConfig {
  model::RingSpec ring{4, 1.0, 0.5};
  nqs::EnsembleMode mode = nqs::EnsembleMode::SingleTrunk;
  int n_heads = 2;
  int width = 32;
  sampler::SamplerConfig sampler;
  trainer::TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out_directory = "runs";
  std::string run_id = "run";
};

// Throws std::invalid_argument on anything a run could not start from.
void validate(const RunConfig& cfg);

// Strict JSON: unknown keys anywhere are an error, known keys override the
// defaults above. parse(text_of(cfg)) reproduces cfg exactly.
RunConfig parse_config(const std::string& json_text);
std::string config_text(const RunConfig& cfg);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

// Built-in study configurations, also shipped as presets/<name>.json.
std::vector<std::string> preset_names();
RunConfig preset(const std::string& name);

}  // namespace nqsens::config
