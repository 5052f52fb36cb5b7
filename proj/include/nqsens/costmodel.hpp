#pragma once

#include "nqsens/types.hpp"

namespace nqsens::costmodel {

// Counting unit: one trunk forward costs N h + h^2 multiply-accumulates.
long long trunk_flops(int n_sites, int width);

// Weight parameters touched by one optimizer update (biases excluded):
// shared trunk plus K head pairs, or K private trunks plus their head pairs.
long long updated_params_single(int n_sites, int width, int n_heads);
long long updated_params_multi(int n_sites, int width, int n_heads);

Real update_ratio(int n_sites, int width, int n_heads);

struct CostInputs {
  int n_sites = 4;
  int width = 32;
  int n_heads = 2;
  long long n_samples = 1;  // evaluations per step
  Real penalty_coeff = 1.0;
};

// Forward plus backward sweep estimates per training step: a shared trunk is
// walked three times per sample (forward, value backward, feature backward)
// and each head costs 6 width-sized dot products; private trunks repeat the
// trunk walks per head.
Real cost_single(const CostInputs& in);
Real cost_multi(const CostInputs& in);

// Pairwise overlap bookkeeping on shared samples.
Real cost_penalty(const CostInputs& in);

// Single-trunk width with the same updated-parameter count as a multi-trunk
// ensemble of width multi_width: the positive root of
//   h^2 + (N + 2K) h - K (N m + m^2 + 2 m) = 0.
Real matched_width(int n_sites, int multi_width, int n_heads);

// Whether trunk work outweighs head work, 2K < N + h.
bool trunk_dominated(int n_sites, int width, int n_heads);

}  // namespace nqsens::costmodel
