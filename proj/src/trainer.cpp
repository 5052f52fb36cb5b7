#include "nqsens/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <unordered_map>

#include "nqsens/rng.hpp"

namespace nqsens::trainer {

namespace {

constexpr Real kLogRatioClamp = 50.0;

Vector effective_head_weights(const TrainConfig& cfg, int n_heads) {
  if (cfg.head_weights.size() == 0) return Vector::Ones(n_heads);
  if (cfg.head_weights.size() != n_heads)
    throw std::invalid_argument("head_weights size does not match the head count");
  return cfg.head_weights;
}

// Shared evaluation cache for one parameter point: every distinct
// configuration touched by the batches (or by a local-energy neighborhood)
// is forwarded through each trunk exactly once. Entries keep first-seen
// order so accumulation is deterministic.
class Assembler {
 public:
  Assembler(const nqs::Ensemble& ens, const model::RingSpec& ring,
            const std::vector<sampler::SampleBatch>& batches, PenaltyForm form)
      : ens_(ens), ring_(ring), batches_(batches), form_(form), n_heads_(ens.n_heads()) {
    if (batches_.empty()) throw std::invalid_argument("no sample batches");
    if (batches_.size() == 1) {
      if (batches_[0].weights.rows() != n_heads_)
        throw std::invalid_argument("shared batch must carry one weight row per head");
    } else {
      if (static_cast<int>(batches_.size()) != n_heads_)
        throw std::invalid_argument("expected one batch per head");
      for (int k = 0; k < n_heads_; ++k)
        if (batches_[k].weights.rows() != 1 || batches_[k].head != k)
          throw std::invalid_argument("per-head batches must be ordered by head");
    }
    sample_index_.resize(n_heads_);
  }

  StepEstimates estimates() {
    index_samples();

    StepEstimates est;
    est.energies = ComplexVector::Zero(n_heads_);
    est.sigma = ComplexMatrix::Identity(n_heads_, n_heads_);
    est.ess = Vector::Zero(n_heads_);
    for (int k = 0; k < n_heads_; ++k) {
      const auto [batch, row] = view(k);
      est.ess[k] = batch->ess[row];
      for (Index i = 0; i < batch->weights.cols(); ++i) {
        const Real w = batch->weights(row, i);
        if (w <= 0.0) continue;
        const int idx = sample_index_[k][i];
        est.energies[k] += w * entries_[idx].e_loc[k];
        for (int l = 0; l < n_heads_; ++l)
          if (l != k) est.sigma(k, l) += w * ratio(idx, k, l, true);
      }
    }
    est.penalty = penalty_value(est.sigma, form_);
    est.frob_dev = frob_deviation(est.sigma);

    Real band = 0.0;
    for (int k = 0; k < n_heads_; ++k) {
      if (est.ess[k] <= 0.0) continue;
      const auto [batch, row] = view(k);
      for (int l = 0; l < n_heads_; ++l) {
        if (l == k) continue;
        Real spread = 0.0;
        for (Index i = 0; i < batch->weights.cols(); ++i) {
          const Real w = batch->weights(row, i);
          if (w <= 0.0) continue;
          spread += w * std::norm(ratio(sample_index_[k][i], k, l, false) - est.sigma(k, l));
        }
        band += spread / est.ess[k];
      }
    }
    est.tau = std::sqrt(band);
    est.clamp_events = clamp_events_;
    return est;
  }

  Vector gradient(Real lambda, const Vector& head_weights, const StepEstimates& est) {
    const Real pf = form_ == PenaltyForm::HalfOffDiagonal ? 0.5 : 1.0;
    for (int k = 0; k < n_heads_; ++k) {
      const auto [batch, row] = view(k);
      for (Index i = 0; i < batch->weights.cols(); ++i) {
        const Real w = batch->weights(row, i);
        if (w <= 0.0) continue;
        const int idx = sample_index_[k][i];
        Matrix& c = entries_[idx].coeff;

        const Complex centered = entries_[idx].e_loc[k] - est.energies[k];
        c(0, k) += 2.0 * head_weights[k] * w * centered.real();
        c(1, k) += 2.0 * head_weights[k] * w * centered.imag();

        const Real a = pf * 2.0 * lambda * w;
        if (a == 0.0) continue;
        for (int l = 0; l < n_heads_; ++l) {
          if (l == k) continue;
          const Complex overlap = est.sigma(k, l);
          const Complex wkl = std::conj(overlap) * ratio(idx, k, l, false);
          c(0, l) += a * wkl.real();
          c(1, l) -= a * wkl.imag();
          c(0, k) += a * (wkl.real() - 2.0 * std::norm(overlap));
          c(1, k) += a * wkl.imag();
        }
      }
    }

    nqs::Ensemble grads = ens_;
    for (auto& head : grads.heads) {
      head.alpha.setZero();
      head.phi.setZero();
      head.beta = 0.0;
      head.gamma = 0.0;
    }
    std::vector<nqs::TrunkGrads> trunk_grads;
    trunk_grads.reserve(ens_.trunks.size());
    for (const auto& trunk : ens_.trunks) trunk_grads.push_back(nqs::zero_like(trunk));

    const int width = ens_.width();
    for (const auto& entry : entries_) {
      for (int k = 0; k < n_heads_; ++k) {
        const Real cr = entry.coeff(0, k), ci = entry.coeff(1, k);
        if (cr == 0.0 && ci == 0.0) continue;
        const Vector& f = entry.trunks[ens_.trunk_index(k)].features;
        auto& head = grads.heads[k];
        head.alpha += cr * f;
        head.beta += cr;
        head.phi += ci * f;
        head.gamma += ci;
      }
      for (std::size_t t = 0; t < ens_.trunks.size(); ++t) {
        Vector cotangent = Vector::Zero(width);
        bool active = false;
        for (int k = 0; k < n_heads_; ++k) {
          if (ens_.trunk_index(k) != static_cast<int>(t)) continue;
          const Real cr = entry.coeff(0, k), ci = entry.coeff(1, k);
          if (cr == 0.0 && ci == 0.0) continue;
          cotangent += cr * ens_.heads[k].alpha + ci * ens_.heads[k].phi;
          active = true;
        }
        if (active) nqs::trunk_vjp(ens_.trunks[t], entry.trunks[t], cotangent, trunk_grads[t]);
      }
    }
    for (std::size_t t = 0; t < ens_.trunks.size(); ++t) {
      grads.trunks[t].w1 = trunk_grads[t].w1;
      grads.trunks[t].b1 = trunk_grads[t].b1;
      grads.trunks[t].w2 = trunk_grads[t].w2;
      grads.trunks[t].b2 = trunk_grads[t].b2;
    }
    return nqs::flatten(grads);
  }

 private:
  struct CacheEntry {
    model::SpinConfig config;
    std::vector<nqs::TrunkCache> trunks;
    ComplexVector logs;
    ComplexVector e_loc;
    std::vector<char> has_e_loc;
    Matrix coeff;
  };

  std::pair<const sampler::SampleBatch*, Index> view(int head) const {
    if (batches_.size() == 1) return {&batches_[0], head};
    return {&batches_[head], 0};
  }

  int lookup(model::SpinConfig x) {
    const auto it = index_.find(x.bits);
    if (it != index_.end()) return it->second;
    CacheEntry entry;
    entry.config = x;
    const Vector spins = model::to_spins(x, ring_.n_sites);
    entry.trunks.reserve(ens_.trunks.size());
    for (const auto& trunk : ens_.trunks)
      entry.trunks.push_back(nqs::trunk_forward_cached(trunk, spins));
    entry.logs = ComplexVector(n_heads_);
    for (int k = 0; k < n_heads_; ++k)
      entry.logs[k] =
          nqs::head_log_psi(ens_.heads[k], entry.trunks[ens_.trunk_index(k)].features);
    entry.e_loc = ComplexVector::Zero(n_heads_);
    entry.has_e_loc.assign(n_heads_, 0);
    entry.coeff = Matrix::Zero(2, n_heads_);
    const int idx = static_cast<int>(entries_.size());
    entries_.push_back(std::move(entry));
    index_.emplace(x.bits, idx);
    return idx;
  }

  void ensure_e_loc(int idx, int k) {
    if (entries_[idx].has_e_loc[k]) return;
    const model::SpinConfig x = entries_[idx].config;
    const Complex log_x = entries_[idx].logs[k];
    const auto elements = model::connected_elements(ring_, x);
    Complex acc = 0.0;
    for (const auto& elem : elements) {
      if (elem.config.bits == x.bits) {
        acc += elem.value;
      } else {
        const int yidx = lookup(elem.config);  // may reallocate entries_
        acc += elem.value * std::exp(entries_[yidx].logs[k] - log_x);
      }
    }
    entries_[idx].e_loc[k] = acc;
    entries_[idx].has_e_loc[k] = 1;
  }

  // exp(l_l - l_k) with the real part of the exponent clamped; counted
  // clamps feed the per-step event tally exactly once per estimate pass.
  Complex ratio(int idx, int k, int l, bool count) {
    const Complex diff = entries_[idx].logs[l] - entries_[idx].logs[k];
    Real re = diff.real();
    if (re > kLogRatioClamp) {
      re = kLogRatioClamp;
      if (count) ++clamp_events_;
    } else if (re < -kLogRatioClamp) {
      re = -kLogRatioClamp;
      if (count) ++clamp_events_;
    }
    return std::exp(Complex(re, diff.imag()));
  }

  void index_samples() {
    for (int k = 0; k < n_heads_; ++k) {
      const auto [batch, row] = view(k);
      if (static_cast<Index>(batch->configs.size()) != batch->weights.cols())
        throw std::invalid_argument("batch weight count does not match its sample count");
      sample_index_[k].assign(batch->configs.size(), -1);
      for (Index i = 0; i < batch->weights.cols(); ++i) {
        if (batch->weights(row, i) <= 0.0) continue;  // underflowed weight: skip entirely
        const int idx = lookup(batch->configs[i]);
        ensure_e_loc(idx, k);
        sample_index_[k][i] = idx;
      }
    }
  }

  const nqs::Ensemble& ens_;
  const model::RingSpec& ring_;
  const std::vector<sampler::SampleBatch>& batches_;
  PenaltyForm form_;
  int n_heads_;
  std::unordered_map<std::uint32_t, int> index_;
  std::vector<CacheEntry> entries_;
  std::vector<std::vector<int>> sample_index_;
  int clamp_events_ = 0;
};

}  // namespace

const char* penalty_form_name(PenaltyForm form) {
  switch (form) {
    case PenaltyForm::Frobenius:
      return "frobenius";
    case PenaltyForm::HalfOffDiagonal:
      return "half-off-diagonal";
  }
  throw std::invalid_argument("unknown penalty form");
}

PenaltyForm penalty_form_from_name(const std::string& name) {
  if (name == "frobenius") return PenaltyForm::Frobenius;
  if (name == "half-off-diagonal") return PenaltyForm::HalfOffDiagonal;
  throw std::invalid_argument("unknown penalty form: " + name);
}

Real lambda_at(const TrainConfig& cfg, int step) {
  if (cfg.anneal_steps <= 0 || step >= cfg.anneal_steps) return cfg.lambda_final;
  return cfg.lambda_start +
         (cfg.lambda_final - cfg.lambda_start) * static_cast<Real>(step) / cfg.anneal_steps;
}

Complex local_energy(const nqs::Ensemble& ens, int head, const model::RingSpec& ring,
                     model::SpinConfig x) {
  if (head < 0 || head >= ens.n_heads()) throw std::invalid_argument("head out of range");
  const Complex log_x = nqs::log_psi(ens, model::to_spins(x, ring.n_sites))[head];
  Complex acc = 0.0;
  for (const auto& elem : model::connected_elements(ring, x)) {
    if (elem.config.bits == x.bits) {
      acc += elem.value;
    } else {
      const Complex log_y = nqs::log_psi(ens, model::to_spins(elem.config, ring.n_sites))[head];
      acc += elem.value * std::exp(log_y - log_x);
    }
  }
  return acc;
}

Real penalty_value(const ComplexMatrix& sigma, PenaltyForm form) {
  Real off = 0.0, diag = 0.0;
  for (Index i = 0; i < sigma.rows(); ++i)
    for (Index j = 0; j < sigma.cols(); ++j) {
      if (i == j)
        diag += std::norm(sigma(i, j) - 1.0);
      else
        off += std::norm(sigma(i, j));
    }
  return form == PenaltyForm::Frobenius ? diag + off : 0.5 * off;
}

Real frob_deviation(const ComplexMatrix& sigma) {
  return (sigma - ComplexMatrix::Identity(sigma.rows(), sigma.cols())).norm();
}

StepEstimates estimate_step(const nqs::Ensemble& ens, const model::RingSpec& ring,
                            const std::vector<sampler::SampleBatch>& batches, PenaltyForm form) {
  Assembler assembler(ens, ring, batches, form);
  return assembler.estimates();
}

GradientResult assemble_gradient(const nqs::Ensemble& ens, const model::RingSpec& ring,
                                 const std::vector<sampler::SampleBatch>& batches, Real lambda,
                                 const TrainConfig& cfg) {
  const Vector head_weights = effective_head_weights(cfg, ens.n_heads());
  Assembler assembler(ens, ring, batches, cfg.penalty_form);
  GradientResult result;
  result.estimates = assembler.estimates();
  result.gradient = assembler.gradient(lambda, head_weights, result.estimates);
  return result;
}

Real full_sum_loss(const nqs::Ensemble& ens, const model::RingSpec& ring, Real lambda,
                   const TrainConfig& cfg) {
  const Vector head_weights = effective_head_weights(cfg, ens.n_heads());
  std::vector<sampler::SampleBatch> batches;
  batches.push_back(sampler::full_sum_batch(ens, ring.n_sites));
  const StepEstimates est = estimate_step(ens, ring, batches, cfg.penalty_form);
  return head_weights.dot(est.energies.real()) + lambda * est.penalty;
}

void adam_step(Vector& params, const Vector& grad, AdamState& state, Real learning_rate) {
  if (state.t == 0) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
  }
  if (grad.size() != params.size() || state.m.size() != params.size())
    throw std::invalid_argument("gradient size does not match the parameter vector");
  constexpr Real beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++state.t;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseAbs2();
  const Real corr1 = 1.0 - std::pow(beta1, state.t);
  const Real corr2 = 1.0 - std::pow(beta2, state.t);
  params.array() -=
      learning_rate * (state.m.array() / corr1) / ((state.v.array() / corr2).sqrt() + eps);
}

TrainResult train(const nqs::Ensemble& init, const model::RingSpec& ring,
                  const TrainOptions& opts) {
  model::validate(ring);
  TrainResult result;
  result.ensemble = init;
  nqs::Ensemble& ens = result.ensemble;
  const int n_heads = ens.n_heads();

  Vector flat = nqs::flatten(ens);
  AdamState adam;
  result.trace.reserve(opts.train.steps);

  for (int step = 0; step < opts.train.steps; ++step) {
    const auto tic = std::chrono::steady_clock::now();
    const Real lambda = lambda_at(opts.train, step);

    std::vector<sampler::SampleBatch> batches;
    sampler::SamplerConfig scfg = opts.sampler;
    const std::uint64_t step_seed = derive_seed(opts.seed, static_cast<std::uint64_t>(step) + 1);
    switch (opts.sampler.mode) {
      case sampler::SampleMode::FullSum:
        batches.push_back(sampler::full_sum_batch(ens, ring.n_sites));
        break;
      case sampler::SampleMode::Mixture:
        scfg.seed = step_seed;
        batches.push_back(sampler::sample_mixture(ens, ring.n_sites, scfg));
        break;
      case sampler::SampleMode::PerHead:
        for (int k = 0; k < n_heads; ++k) {
          scfg.seed = derive_seed(step_seed, static_cast<std::uint64_t>(k));
          batches.push_back(sampler::sample_per_head(ens, k, ring.n_sites, scfg));
        }
        break;
    }

    const GradientResult grad = assemble_gradient(ens, ring, batches, lambda, opts.train);
    adam_step(flat, grad.gradient, adam, opts.train.learning_rate);
    nqs::unflatten(flat, ens);

    TraceRow row;
    row.step = step;
    row.energies = grad.estimates.energies.real();
    row.frob_dev = grad.estimates.frob_dev;
    row.lambda = lambda;
    row.ess = grad.estimates.ess;
    row.seconds = std::chrono::duration<Real>(std::chrono::steady_clock::now() - tic).count();
    row.tau = grad.estimates.tau;
    row.band_exceeded = grad.estimates.frob_dev > 2.0 * grad.estimates.tau;
    row.clamp_events = grad.estimates.clamp_events;
    result.trace.push_back(std::move(row));
  }
  return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file for writing: " + path.string());
  const Index n_heads = trace.empty() ? 0 : trace.front().energies.size();
  out << "step";
  for (Index k = 1; k <= n_heads; ++k) out << ",E_" << k;
  out << ",frob_dev,lambda";
  for (Index k = 1; k <= n_heads; ++k) out << ",ess_" << k;
  out << ",seconds\n";
  out << std::setprecision(17);
  for (const auto& row : trace) {
    out << row.step;
    for (Index k = 0; k < n_heads; ++k) out << ',' << row.energies[k];
    out << ',' << row.frob_dev << ',' << row.lambda;
    for (Index k = 0; k < n_heads; ++k) out << ',' << row.ess[k];
    out << ',' << row.seconds << '\n';
  }
  if (!out.good()) throw std::runtime_error("failed while writing trace file: " + path.string());
}

}  // namespace nqsens::trainer
