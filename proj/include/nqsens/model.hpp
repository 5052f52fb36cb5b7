#pragma once

#include <cstdint>
#include <vector>

#include "nqsens/types.hpp"

namespace nqsens::model {

// One spin-1/2 configuration of a ring with up to 16 sites, restricted to the
// zero-magnetization sector. Bit j set means spin up (sigma_j = +1) at site j.
struct SpinConfig {
  std::uint32_t bits = 0;
  friend bool operator==(SpinConfig a, SpinConfig b) { return a.bits == b.bits; }
  friend bool operator<(SpinConfig a, SpinConfig b) { return a.bits < b.bits; }
};

// Antiferromagnetic ring H = j1 * sum_j S_j.S_{j+1} + j2 * sum_j S_j.S_{j+2},
// sites mod n_sites. j2 = j1/2 puts the ring at the Majumdar-Ghosh point.
struct RingSpec {
  int n_sites = 4;
  Real j1 = 1.0;
  Real j2 = 0.5;
};

// Throws std::invalid_argument unless n_sites is even and in [4, 16].
void validate(const RingSpec& spec);

int spin_at(SpinConfig x, int site);            // +1 or -1
Vector to_spins(SpinConfig x, int n_sites);     // entries in {-1, +1}
SpinConfig translate(SpinConfig x, int n_sites);  // site j+1 takes site j's spin
SpinConfig neel_even_up(int n_sites);           // up spins on even sites
SpinConfig neel_odd_up(int n_sites);

// Zero-magnetization basis: configs sorted ascending by bits, with an O(1)
// bits -> index lookup (-1 outside the sector).
struct SectorBasis {
  int n_sites = 0;
  std::vector<SpinConfig> configs;
  std::vector<std::int32_t> lookup;

  Index size() const { return static_cast<Index>(configs.size()); }
  Index index_of(SpinConfig x) const { return lookup[x.bits]; }
};

SectorBasis build_sector_basis(int n_sites);

struct ConnectedElement {
  SpinConfig config;
  Real value;  // <config|H|x>
};

// All matrix elements of one Hamiltonian column: the diagonal entry first
// (present even when zero), then one entry per configuration reachable by
// exchanging an antiparallel pair at distance 1 or 2. Coincident pairs are
// merged by summing. The exchange conserves magnetization, so every returned
// configuration stays in the sector.
std::vector<ConnectedElement> connected_elements(const RingSpec& spec, SpinConfig x);

// Dense sector Hamiltonian; symmetric by construction.
Matrix dense_hamiltonian(const RingSpec& spec, const SectorBasis& basis);

struct EdResult {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // orthonormal columns, matching order
  Real ground_energy = 0;
  int degeneracy = 0;   // eigenvalues within degeneracy_tol * spectral range of the minimum
  Matrix ground_block;  // first `degeneracy` eigenvectors
};

// Throws std::invalid_argument if H is not symmetric.
EdResult exact_diagonalize(const Matrix& hamiltonian, Real degeneracy_tol = 1e-8);

// Nearest-neighbour dimer coverings as sector amplitude vectors. phi_a pairs
// sites (0,1),(2,3),...; phi_b pairs (1,2),(3,4),...,(n-1,0). Each bond holds
// the singlet (up*down - down*up)/sqrt(2), oriented along the bond. Both
// states are unit norm with support of size 2^{n/2}, flat modulus 2^{-n/4},
// and overlap <phi_b|phi_a> = (-1)^{n/2} * 2^{1 - n/2}.
struct DimerPair {
  ComplexVector phi_a;
  ComplexVector phi_b;
  Real overlap;
};

DimerPair build_dimer_states(const SectorBasis& basis);

// Translation-symmetric combinations (phi_a +/- phi_b) / sqrt(2 (1 +/- ovl)).
// psi_plus has translation eigenvalue +1, psi_minus has -1. One of the two
// vanishes on the Neel configurations depending on n mod 4.
struct MomentumPair {
  ComplexVector psi_plus;
  ComplexVector psi_minus;
};

MomentumPair build_momentum_states(const SectorBasis& basis);

// Amplitude-vector action of the translation: out[index(translate(x))] = v[index(x)].
ComplexVector translate_vector(const ComplexVector& v, const SectorBasis& basis);

}  // namespace nqsens::model
