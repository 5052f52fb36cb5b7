#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nqsens/model.hpp"
#include "nqsens/types.hpp"

namespace nqsens::nqs {

// Whether the heads share one trunk or each head owns a private copy.
enum class EnsembleMode { SingleTrunk, MultiTrunk };

const char* mode_name(EnsembleMode mode);            // "st-mh" / "mt-mh"
EnsembleMode mode_from_name(const std::string& name);  // throws std::invalid_argument

// Two-layer feature map: features = w2 * relu(w1 * spins + b1) + b2.
struct TrunkParams {
  Matrix w1;  // width x n_sites
  Vector b1;  // width
  Matrix w2;  // width x width
  Vector b2;  // width

  int width() const { return static_cast<int>(b2.size()); }
  int input_dim() const { return static_cast<int>(w1.cols()); }
};

// Affine complex read-out on top of the trunk features:
// log psi_k(x) = (alpha . f + beta) + i (phi . f + gamma).
struct HeadParams {
  Vector alpha;  // log-modulus feature weights
  Vector phi;    // phase feature weights
  Real beta = 0.0;
  Real gamma = 0.0;
};

struct Ensemble {
  EnsembleMode mode = EnsembleMode::SingleTrunk;
  std::vector<TrunkParams> trunks;  // one, or one per head
  std::vector<HeadParams> heads;

  int n_heads() const { return static_cast<int>(heads.size()); }
  int width() const { return trunks.front().width(); }
  int input_dim() const { return trunks.front().input_dim(); }
  int trunk_index(int head) const { return mode == EnsembleMode::SingleTrunk ? 0 : head; }
  const TrunkParams& trunk_for(int head) const { return trunks[trunk_index(head)]; }
};

// Random initialization: trunk weights i.i.d. normal with std 1/sqrt(fan-in),
// trunk biases zero, head alpha/phi i.i.d. normal with std 0.01,
// beta = gamma = 0. Draw order is trunk(s) then heads so that single- and
// multi-trunk ensembles consume the stream identically at one head.
Ensemble init_ensemble(EnsembleMode mode, int n_sites, int width, int n_heads,
                       std::uint64_t seed);

Vector trunk_forward(const TrunkParams& trunk, const Vector& spins);

// Forward pass with the intermediates needed for reverse mode.
struct TrunkCache {
  Vector spins;
  Vector pre1;      // w1 * spins + b1
  Vector act1;      // relu(pre1)
  Vector features;  // w2 * act1 + b2
};

TrunkCache trunk_forward_cached(const TrunkParams& trunk, const Vector& spins);

Complex head_log_psi(const HeadParams& head, const Vector& features);

// log psi for every head at one configuration.
ComplexVector log_psi(const Ensemble& ens, const Vector& spins);

// Derivatives of log psi_k with respect to the head's own parameters, at
// fixed features: d/d alpha_m = f_m, d/d beta = 1, d/d phi_m = i f_m,
// d/d gamma = i.
struct HeadLogDerivatives {
  ComplexVector alpha;
  ComplexVector phi;
  Complex beta;
  Complex gamma;
};

HeadLogDerivatives head_log_derivatives(const HeadParams& head, const Vector& features);

struct TrunkGrads {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

TrunkGrads zero_like(const TrunkParams& trunk);

// Accumulates d(cotangent . features)/d(trunk params) into grads. The relu
// subgradient at exactly zero preactivation is zero.
void trunk_vjp(const TrunkParams& trunk, const TrunkCache& cache,
               const Vector& cotangent, TrunkGrads& grads);

struct ParamCount {
  std::int64_t exact;   // every stored scalar
  std::int64_t theory;  // leading-order bookkeeping used by the cost model
};

ParamCount exact_param_count(EnsembleMode mode, int n_sites, int width, int n_heads);

// Flat parameter order per trunk: w1 row-major, b1, w2 row-major, b2; all
// trunks first, then per head: alpha, phi, beta, gamma.
Index flat_size(const Ensemble& ens);
Vector flatten(const Ensemble& ens);
void unflatten(const Vector& flat, Ensemble& ens);  // shapes taken from ens

// Checkpoint JSON: shape metadata plus the flat parameter array; numeric
// round-trip is bit exact.
void save_checkpoint(const Ensemble& ens, const std::filesystem::path& path);
Ensemble load_checkpoint(const std::filesystem::path& path);

}  // namespace nqsens::nqs
