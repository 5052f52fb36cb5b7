#include "nqsens/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nqsens::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

const json& section(const json& j, const char* key) {
  const json& s = j.at(key);
  if (!s.is_object()) fail(std::string("config section \"") + key + "\" must be an object");
  return s;
}

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) fail("unknown key \"" + it.key() + "\" in " + where);
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_model(const json& j, RunConfig& cfg) {
  check_keys(j, "model", {"n_sites", "j1", "j2"});
  read_field(j, "n_sites", cfg.ring.n_sites);
  read_field(j, "j1", cfg.ring.j1);
  read_field(j, "j2", cfg.ring.j2);
}

void read_ensemble(const json& j, RunConfig& cfg) {
  check_keys(j, "ensemble", {"mode", "n_heads", "width"});
  if (j.contains("mode")) cfg.mode = nqs::mode_from_name(j.at("mode").get<std::string>());
  read_field(j, "n_heads", cfg.n_heads);
  read_field(j, "width", cfg.width);
}

void read_sampler(const json& j, RunConfig& cfg) {
  check_keys(j, "sampler", {"n_samples", "n_chains", "sweeps", "burn_in", "mode"});
  read_field(j, "n_samples", cfg.sampler.n_samples);
  read_field(j, "n_chains", cfg.sampler.n_chains);
  read_field(j, "sweeps", cfg.sampler.sweeps);
  read_field(j, "burn_in", cfg.sampler.burn_in);
  if (j.contains("mode"))
    cfg.sampler.mode = sampler::sample_mode_from_name(j.at("mode").get<std::string>());
}

void read_train(const json& j, RunConfig& cfg) {
  check_keys(j, "train",
             {"learning_rate", "steps", "lambda_start", "lambda_final", "anneal_steps",
              "head_weights", "penalty_form"});
  read_field(j, "learning_rate", cfg.train.learning_rate);
  read_field(j, "steps", cfg.train.steps);
  read_field(j, "lambda_start", cfg.train.lambda_start);
  read_field(j, "lambda_final", cfg.train.lambda_final);
  read_field(j, "anneal_steps", cfg.train.anneal_steps);
  if (j.contains("head_weights")) {
    const auto w = j.at("head_weights").get<std::vector<double>>();
    cfg.train.head_weights = Eigen::Map<const Vector>(w.data(), static_cast<Index>(w.size()));
  }
  if (j.contains("penalty_form"))
    cfg.train.penalty_form =
        trainer::penalty_form_from_name(j.at("penalty_form").get<std::string>());
}

void read_output(const json& j, RunConfig& cfg) {
  check_keys(j, "output", {"directory", "run_id"});
  read_field(j, "directory", cfg.out_directory);
  read_field(j, "run_id", cfg.run_id);
}

RunConfig from_json(const json& j) {
  if (!j.is_object()) fail("config root must be a JSON object");
  check_keys(j, "config root", {"model", "ensemble", "sampler", "train", "seeds", "output"});
  RunConfig cfg;
  if (j.contains("model")) read_model(section(j, "model"), cfg);
  if (j.contains("ensemble")) read_ensemble(section(j, "ensemble"), cfg);
  if (j.contains("sampler")) read_sampler(section(j, "sampler"), cfg);
  if (j.contains("train")) read_train(section(j, "train"), cfg);
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("output")) read_output(section(j, "output"), cfg);
  return cfg;
}

json to_json(const RunConfig& cfg) {
  std::vector<double> weights(cfg.train.head_weights.begin(), cfg.train.head_weights.end());
  return json{
      {"model", {{"n_sites", cfg.ring.n_sites}, {"j1", cfg.ring.j1}, {"j2", cfg.ring.j2}}},
      {"ensemble",
       {{"mode", nqs::mode_name(cfg.mode)}, {"n_heads", cfg.n_heads}, {"width", cfg.width}}},
      {"sampler",
       {{"n_samples", cfg.sampler.n_samples},
        {"n_chains", cfg.sampler.n_chains},
        {"sweeps", cfg.sampler.sweeps},
        {"burn_in", cfg.sampler.burn_in},
        {"mode", sampler::sample_mode_name(cfg.sampler.mode)}}},
      {"train",
       {{"learning_rate", cfg.train.learning_rate},
        {"steps", cfg.train.steps},
        {"lambda_start", cfg.train.lambda_start},
        {"lambda_final", cfg.train.lambda_final},
        {"anneal_steps", cfg.train.anneal_steps},
        {"head_weights", weights},
        {"penalty_form", trainer::penalty_form_name(cfg.train.penalty_form)}}},
      {"seeds", cfg.seeds},
      {"output", {{"directory", cfg.out_directory}, {"run_id", cfg.run_id}}}};
}

RunConfig mg_preset(const char* id, int n_sites, int width, int steps, int n_samples,
                    Real lambda_start, Real lambda_final, int anneal_steps, int n_seeds) {
  RunConfig cfg;
  cfg.ring = {n_sites, 1.0, 0.5};
  cfg.width = width;
  cfg.sampler.n_samples = n_samples;
  cfg.train.steps = steps;
  cfg.train.lambda_start = lambda_start;
  cfg.train.lambda_final = lambda_final;
  cfg.train.anneal_steps = anneal_steps;
  cfg.seeds.clear();
  for (int s = 1; s <= n_seeds; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  cfg.run_id = id;
  return cfg;
}

}  // namespace

void validate(const RunConfig& cfg) {
  model::validate(cfg.ring);
  if (cfg.n_heads < 1) fail("ensemble.n_heads must be at least 1");
  if (cfg.width < 1) fail("ensemble.width must be at least 1");
  if (cfg.sampler.n_samples < 1) fail("sampler.n_samples must be at least 1");
  if (cfg.sampler.n_chains < 1) fail("sampler.n_chains must be at least 1");
  if (cfg.sampler.sweeps < 1) fail("sampler.sweeps must be at least 1");
  if (cfg.sampler.burn_in < 0) fail("sampler.burn_in must be nonnegative");
  if (!(cfg.train.learning_rate > 0)) fail("train.learning_rate must be positive");
  if (cfg.train.steps < 0) fail("train.steps must be nonnegative");
  if (cfg.train.anneal_steps < 0) fail("train.anneal_steps must be nonnegative");
  if (cfg.train.lambda_start < 0 || cfg.train.lambda_final < 0)
    fail("train.lambda values must be nonnegative");
  const Index nw = cfg.train.head_weights.size();
  if (nw != 0 && nw != cfg.n_heads)
    fail("train.head_weights must be empty or have one entry per head");
  if (nw != 0 && !(cfg.train.head_weights.minCoeff() >= 0 && cfg.train.head_weights.sum() > 0))
    fail("train.head_weights must be nonnegative with positive sum");
  if (cfg.seeds.empty()) fail("seeds must list at least one seed");
  if (cfg.out_directory.empty()) fail("output.directory must not be empty");
  if (cfg.run_id.empty()) fail("output.run_id must not be empty");
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    cfg = from_json(j);
  } catch (const json::exception& e) {
    fail(std::string("config field has the wrong type: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

std::string config_text(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file " + path.string());
  out << config_text(cfg);
}

std::vector<std::string> preset_names() { return {"n4", "n4b", "n4c", "n6", "n8"}; }

RunConfig preset(const std::string& name) {
  if (name == "n4") return mg_preset("n4", 4, 32, 1000, 512, 1e-3, 0.5, 200, 3);
  if (name == "n4b") return mg_preset("n4b", 4, 2, 3000, 1024, 1e-11, 0.5, 1600, 5);
  if (name == "n4c") return mg_preset("n4c", 4, 4, 2500, 1024, 1e-8, 1.5, 1200, 5);
  if (name == "n6") return mg_preset("n6", 6, 64, 1000, 512, 1e-3, 0.5, 200, 3);
  if (name == "n8") return mg_preset("n8", 8, 64, 1000, 512, 1e-3, 0.5, 200, 3);
  fail("unknown preset \"" + name + "\" (known: n4, n4b, n4c, n6, n8)");
}

}  // namespace nqsens::config
