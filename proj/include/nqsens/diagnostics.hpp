#pragma once

#include <vector>

#include "nqsens/model.hpp"
#include "nqsens/nqs.hpp"
#include "nqsens/types.hpp"

namespace nqsens::diagnostics {

// Normalized amplitude vector of one head over the sector, stabilized by
// subtracting the largest log modulus before exponentiating.
ComplexVector head_state_vector(const nqs::Ensemble& ens, const model::SectorBasis& basis,
                                int head);
ComplexMatrix head_state_matrix(const nqs::Ensemble& ens, const model::SectorBasis& basis);

struct EnergyMoments {
  Real energy;
  Real variance;
};
EnergyMoments energy_and_variance(const ComplexVector& state, const Matrix& hamiltonian);

// sigma(k, l) = <psi_k|psi_l> / <psi_k|psi_k>, matching the sampled estimator.
ComplexMatrix exact_overlap_matrix(const ComplexMatrix& states);

// |<a|b>|^2 / (|a|^2 |b|^2)
Real fidelity(const ComplexVector& a, const ComplexVector& b);

// state times the global phase that makes <reference|state> real and nonnegative
ComplexVector align_global_phase(const ComplexVector& reference, const ComplexVector& state);

// How a head family sits inside the exact ground manifold. The frame under
// the singular value analysis holds the projected states normalized to unit
// length, so its spectrum measures angles within the manifold while the
// fidelities measure leakage out of it.
struct ProjectionMetrics {
  Vector fidelities;  // per head: weight inside the manifold
  Real f_mean = 0.0, f_min = 0.0;
  int rank = 0;   // numerical rank of the projected frame
  int d_eff = 0;  // projected-frame singular values at or above 0.99
  Real sigma_min = 0.0, kappa = 0.0;
};
ProjectionMetrics projection_metrics(const ComplexMatrix& states, const Matrix& ground_block);

// Affine rank of a state family over its common support: every state is
// rewritten as exp(g + i omega) with principal-branch phases, after a global
// rotation per state that places the branch cut in an empty arc of the
// observed phases and keeps the joint rank smallest, so the measured rank
// does not depend on the arbitrary global phase of each state. The reported
// ranks are the dimensions of the spans including the constant vector; a
// width-h feature table reproduces the family exactly iff h >= r_both - 1.
struct RankReport {
  Index support_size = 0;
  int r_g = 0;      // dim span{1, log moduli}
  int r_omega = 0;  // dim span{1, phases}
  int r_both = 0;   // dim span{1, log moduli, phases}
  int h_star = 0;   // r_both - 1
};
RankReport rank_analysis(const ComplexMatrix& states, Real support_tol = 1e-10);

// Feature table over an explicit support; amplitudes vanish exactly off it.
struct TabularEnsemble {
  std::vector<model::SpinConfig> support;
  Matrix features;  // one row per support configuration
  std::vector<nqs::HeadParams> heads;

  int width() const { return static_cast<int>(features.cols()); }
  int n_heads() const { return static_cast<int>(heads.size()); }
};

// Builds a width-`width` table whose heads reproduce the given states exactly
// on their common support. Feature columns are the log-modulus/phase columns
// that survive a Gram-Schmidt screen seeded with the constant vector, padded
// with zeros. Throws when width < r_both - 1.
TabularEnsemble construct_representing_ensemble(const ComplexMatrix& states,
                                                const model::SectorBasis& basis, int width,
                                                Real support_tol = 1e-10);

ComplexVector tabular_state_vector(const TabularEnsemble& table, const model::SectorBasis& basis,
                                   int head);

}  // namespace nqsens::diagnostics
