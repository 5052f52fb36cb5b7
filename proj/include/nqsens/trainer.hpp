#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nqsens/model.hpp"
#include "nqsens/nqs.hpp"
#include "nqsens/sampler.hpp"
#include "nqsens/types.hpp"

namespace nqsens::trainer {

enum class PenaltyForm { Frobenius, HalfOffDiagonal };

const char* penalty_form_name(PenaltyForm form);
PenaltyForm penalty_form_from_name(const std::string& name);

struct TrainConfig {
  Real learning_rate = 1e-3;
  int steps = 1000;
  Real lambda_start = 1e-3;
  Real lambda_final = 0.5;
  int anneal_steps = 200;
  Vector head_weights;  // empty means every head weighs one
  PenaltyForm penalty_form = PenaltyForm::Frobenius;
};

// Linear ramp from lambda_start to lambda_final over anneal_steps, flat after.
Real lambda_at(const TrainConfig& cfg, int step);

// E_loc(x) = sum_y <y|H|x> psi(y) / psi(x) for one head.
Complex local_energy(const nqs::Ensemble& ens, int head, const model::RingSpec& ring,
                     model::SpinConfig x);

// ||sigma - I||_F^2, or half the off-diagonal sum for the halved form.
Real penalty_value(const ComplexMatrix& sigma, PenaltyForm form);
Real frob_deviation(const ComplexMatrix& sigma);

struct StepEstimates {
  ComplexVector energies;  // weighted local-energy means, one per head
  ComplexMatrix sigma;     // normalized overlap estimates, unit diagonal
  Real penalty = 0.0;
  Real frob_dev = 0.0;
  Real tau = 0.0;  // sampling-noise scale for the overlap deviation
  Vector ess;
  int clamp_events = 0;
};

// One batch with a weight row per head (mixture or full-sum), or one
// single-row batch per head.
StepEstimates estimate_step(const nqs::Ensemble& ens, const model::RingSpec& ring,
                            const std::vector<sampler::SampleBatch>& batches, PenaltyForm form);

struct GradientResult {
  Vector gradient;  // flat, in the ensemble parameter layout
  StepEstimates estimates;
};

// Gradient of sum_k w_k Re E_k + lambda * penalty under the batch weights.
// With exact full-sum weights this is the exact loss gradient.
GradientResult assemble_gradient(const nqs::Ensemble& ens, const model::RingSpec& ring,
                                 const std::vector<sampler::SampleBatch>& batches, Real lambda,
                                 const TrainConfig& cfg);

// Loss evaluated with exact sector sums; finite-difference reference for the
// assembled gradient.
Real full_sum_loss(const nqs::Ensemble& ens, const model::RingSpec& ring, Real lambda,
                   const TrainConfig& cfg);

struct AdamState {
  Vector m, v;
  int t = 0;
};

void adam_step(Vector& params, const Vector& grad, AdamState& state, Real learning_rate);

struct TraceRow {
  int step = 0;
  Vector energies;
  Real frob_dev = 0.0;
  Real lambda = 0.0;
  Vector ess;
  Real seconds = 0.0;
  // diagnostics kept out of the trace file
  Real tau = 0.0;
  bool band_exceeded = false;
  int clamp_events = 0;
};

struct TrainOptions {
  TrainConfig train;
  sampler::SamplerConfig sampler;
  std::uint64_t seed = 1;
};

struct TrainResult {
  nqs::Ensemble ensemble;
  std::vector<TraceRow> trace;
};

TrainResult train(const nqs::Ensemble& init, const model::RingSpec& ring,
                  const TrainOptions& opts);

// Columns: step, E_1..E_K, frob_dev, lambda, ess_1..ess_K, seconds.
void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

}  // namespace nqsens::trainer
