#include "nqsens/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "nqsens/rng.hpp"

namespace nqsens::sampler {

namespace {

constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

void validate(int n_sites, const SamplerConfig& cfg) {
  model::validate(model::RingSpec{n_sites, 1.0, 0.0});
  if (cfg.n_samples < 1) throw std::invalid_argument("n_samples must be positive");
  if (cfg.n_chains < 1) throw std::invalid_argument("n_chains must be positive");
  if (cfg.sweeps < 1) throw std::invalid_argument("sweeps must be positive");
  if (cfg.burn_in < 0) throw std::invalid_argument("burn_in must be nonnegative");
}

Real log_sum_exp(const Vector& a) {
  const Real m = a.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((a.array() - m).exp().sum());
}

// Normalizes each row in place and returns per-row effective sample sizes.
// A row whose weights all underflowed stays zero.
Vector normalize_rows(Matrix& weights) {
  Vector ess(weights.rows());
  for (Index k = 0; k < weights.rows(); ++k) {
    const Real total = weights.row(k).sum();
    if (total > 0.0) weights.row(k) /= total;
    ess[k] = effective_sample_size(weights.row(k).transpose());
  }
  return ess;
}

}  // namespace

const char* sample_mode_name(SampleMode mode) {
  switch (mode) {
    case SampleMode::PerHead:
      return "per-head";
    case SampleMode::Mixture:
      return "mixture";
    case SampleMode::FullSum:
      return "full-sum";
  }
  throw std::invalid_argument("unknown sample mode");
}

SampleMode sample_mode_from_name(const std::string& name) {
  if (name == "per-head") return SampleMode::PerHead;
  if (name == "mixture") return SampleMode::Mixture;
  if (name == "full-sum") return SampleMode::FullSum;
  throw std::invalid_argument("unknown sample mode: " + name);
}

model::SpinConfig random_sector_config(int n_sites, std::mt19937_64& rng) {
  std::vector<int> sites(n_sites);
  std::iota(sites.begin(), sites.end(), 0);
  std::shuffle(sites.begin(), sites.end(), rng);
  std::uint32_t bits = 0;
  for (int i = 0; i < n_sites / 2; ++i) bits |= 1u << sites[i];
  return model::SpinConfig{bits};
}

model::SpinConfig propose_exchange(model::SpinConfig x, int n_sites, std::mt19937_64& rng) {
  int ups[32], downs[32];
  int n_up = 0, n_down = 0;
  for (int i = 0; i < n_sites; ++i) {
    if (x.bits >> i & 1u)
      ups[n_up++] = i;
    else
      downs[n_down++] = i;
  }
  const int u = ups[std::uniform_int_distribution<int>(0, n_up - 1)(rng)];
  const int d = downs[std::uniform_int_distribution<int>(0, n_down - 1)(rng)];
  return model::SpinConfig{x.bits ^ (1u << u) ^ (1u << d)};
}

std::vector<model::SpinConfig> run_chains(const LogDensity& log_density, int n_sites,
                                          const SamplerConfig& cfg) {
  validate(n_sites, cfg);
  const int n_chains = cfg.n_chains;
  std::vector<std::vector<model::SpinConfig>> per_chain(n_chains);

  for (int c = 0; c < n_chains; ++c) {
    const int quota = cfg.n_samples / n_chains + (c < cfg.n_samples % n_chains ? 1 : 0);
    if (quota == 0) continue;
    auto rng = make_engine(cfg.seed, static_cast<std::uint64_t>(c));
    std::uniform_real_distribution<Real> uniform(0.0, 1.0);

    model::SpinConfig x = random_sector_config(n_sites, rng);
    Real logp = log_density(x);
    for (int tries = 0; logp == kNegInf; ++tries) {
      if (tries >= 1000)
        throw std::runtime_error("sampler found no configuration with nonzero weight");
      x = random_sector_config(n_sites, rng);
      logp = log_density(x);
    }

    auto sweep = [&] {
      for (int p = 0; p < n_sites; ++p) {
        const model::SpinConfig y = propose_exchange(x, n_sites, rng);
        const Real logq = log_density(y);
        if (logq >= logp || uniform(rng) < std::exp(logq - logp)) {
          x = y;
          logp = logq;
        }
      }
    };

    for (int s = 0; s < cfg.burn_in; ++s) sweep();
    per_chain[c].reserve(quota);
    for (int s = 0; s < quota; ++s) {
      for (int w = 0; w < cfg.sweeps; ++w) sweep();
      per_chain[c].push_back(x);
    }
  }

  std::vector<model::SpinConfig> merged(cfg.n_samples);
  for (int i = 0; i < cfg.n_samples; ++i) merged[i] = per_chain[i % n_chains][i / n_chains];
  return merged;
}

Real effective_sample_size(const Vector& weights) {
  const Real total = weights.sum();
  if (total <= 0.0) return 0.0;
  return total * total / weights.squaredNorm();
}

SampleBatch sample_per_head(const nqs::Ensemble& ens, int head, int n_sites,
                            const SamplerConfig& cfg) {
  if (head < 0 || head >= ens.n_heads()) throw std::invalid_argument("head out of range");
  const LogDensity target = [&](model::SpinConfig x) {
    return 2.0 * nqs::log_psi(ens, model::to_spins(x, n_sites))[head].real();
  };
  SampleBatch batch;
  batch.configs = run_chains(target, n_sites, cfg);
  batch.weights = Matrix::Constant(1, cfg.n_samples, 1.0 / cfg.n_samples);
  batch.ess = Vector::Constant(1, static_cast<Real>(cfg.n_samples));
  batch.head = head;
  return batch;
}

SampleBatch sample_mixture(const nqs::Ensemble& ens, int n_sites, const SamplerConfig& cfg) {
  const int n_heads = ens.n_heads();
  const LogDensity target = [&](model::SpinConfig x) {
    const ComplexVector l = nqs::log_psi(ens, model::to_spins(x, n_sites));
    return log_sum_exp(2.0 * l.real());
  };

  SampleBatch batch;
  batch.configs = run_chains(target, n_sites, cfg);
  batch.weights = Matrix(n_heads, cfg.n_samples);
  for (int i = 0; i < cfg.n_samples; ++i) {
    const ComplexVector l = nqs::log_psi(ens, model::to_spins(batch.configs[i], n_sites));
    const Vector log_head = 2.0 * l.real();
    const Real log_mix = log_sum_exp(log_head);
    // each exponent is <= 0, so the raw weights cannot overflow
    batch.weights.col(i) = (log_head.array() - log_mix).exp();
  }
  batch.ess = normalize_rows(batch.weights);
  return batch;
}

SampleBatch full_sum_batch(const nqs::Ensemble& ens, int n_sites) {
  const model::SectorBasis basis = model::build_sector_basis(n_sites);
  const int n_heads = ens.n_heads();

  SampleBatch batch;
  batch.configs = basis.configs;
  Matrix log_weights(n_heads, basis.size());
  for (Index i = 0; i < basis.size(); ++i) {
    const ComplexVector l = nqs::log_psi(ens, model::to_spins(basis.configs[i], n_sites));
    log_weights.col(i) = 2.0 * l.real();
  }
  batch.weights = Matrix(n_heads, basis.size());
  for (int k = 0; k < n_heads; ++k) {
    const Real m = log_weights.row(k).maxCoeff();
    batch.weights.row(k) = (log_weights.row(k).array() - m).exp();
  }
  batch.ess = normalize_rows(batch.weights);
  return batch;
}

}  // namespace nqsens::sampler
