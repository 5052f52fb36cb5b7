#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nqsens/model.hpp"
#include "nqsens/nqs.hpp"
#include "nqsens/types.hpp"

namespace nqsens::sampler {

enum class SampleMode { PerHead, Mixture, FullSum };

const char* sample_mode_name(SampleMode mode);
SampleMode sample_mode_from_name(const std::string& name);

struct SamplerConfig {
  int n_samples = 512;
  int n_chains = 8;
  int sweeps = 5;     // sweeps between recorded samples
  int burn_in = 100;  // sweeps discarded up front
  SampleMode mode = SampleMode::Mixture;
  std::uint64_t seed = 0;
};

// Samples plus per-head normalized importance weights. weights(k, i) is the
// weight of sample i in estimators for head k; every row sums to one unless
// all of its raw weights underflowed to zero, which callers treat as a skip
// sentinel. Per-head batches have a single row and `head` names its target.
struct SampleBatch {
  std::vector<model::SpinConfig> configs;
  Matrix weights;
  Vector ess;
  int head = -1;
};

using LogDensity = std::function<Real(model::SpinConfig)>;

model::SpinConfig random_sector_config(int n_sites, std::mt19937_64& rng);

// Uniform exchange move: swap one up spin with one down spin. Symmetric, and
// it preserves total magnetization, so chains stay in the zero sector.
model::SpinConfig propose_exchange(model::SpinConfig x, int n_sites, std::mt19937_64& rng);

// Metropolis-Hastings over the zero-magnetization sector. One sweep is
// n_sites proposals. Each chain gets its own stream derived from cfg.seed,
// and the per-chain outputs are interleaved round-robin.
std::vector<model::SpinConfig> run_chains(const LogDensity& log_density, int n_sites,
                                          const SamplerConfig& cfg);

// (sum w)^2 / sum w^2; zero when every weight vanishes.
Real effective_sample_size(const Vector& weights);

SampleBatch sample_per_head(const nqs::Ensemble& ens, int head, int n_sites,
                            const SamplerConfig& cfg);

// Draw from the equal mixture of head densities and reweight each head by
// self-normalized importance sampling.
SampleBatch sample_mixture(const nqs::Ensemble& ens, int n_sites, const SamplerConfig& cfg);

// Deterministic batch over the whole sector with exact Born weights per head.
SampleBatch full_sum_batch(const nqs::Ensemble& ens, int n_sites);

}  // namespace nqsens::sampler
