#include "nqsens/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nqsens::model {

void validate(const RingSpec& spec) {
  if (spec.n_sites < 4 || spec.n_sites > 16 || spec.n_sites % 2 != 0) {
    throw std::invalid_argument("n_sites must be even and within [4, 16], got " +
                                std::to_string(spec.n_sites));
  }
}

int spin_at(SpinConfig x, int site) { return (x.bits >> site) & 1u ? 1 : -1; }

Vector to_spins(SpinConfig x, int n_sites) {
  Vector s(n_sites);
  for (int j = 0; j < n_sites; ++j) s[j] = static_cast<Real>(spin_at(x, j));
  return s;
}

SpinConfig translate(SpinConfig x, int n_sites) {
  const std::uint32_t mask = (1u << n_sites) - 1u;
  return SpinConfig{((x.bits << 1) | (x.bits >> (n_sites - 1))) & mask};
}

SpinConfig neel_even_up(int n_sites) {
  std::uint32_t bits = 0;
  for (int j = 0; j < n_sites; j += 2) bits |= 1u << j;
  return SpinConfig{bits};
}

SpinConfig neel_odd_up(int n_sites) {
  return SpinConfig{neel_even_up(n_sites).bits << 1};
}

SectorBasis build_sector_basis(int n_sites) {
  validate(RingSpec{n_sites, 0.0, 0.0});
  SectorBasis basis;
  basis.n_sites = n_sites;
  const std::uint32_t total = 1u << n_sites;
  basis.lookup.assign(total, -1);
  for (std::uint32_t b = 0; b < total; ++b) {
    if (std::popcount(b) == n_sites / 2) {
      basis.lookup[b] = static_cast<std::int32_t>(basis.configs.size());
      basis.configs.push_back(SpinConfig{b});
    }
  }
  return basis;
}

std::vector<ConnectedElement> connected_elements(const RingSpec& spec, SpinConfig x) {
  validate(spec);
  const int n = spec.n_sites;
  std::vector<ConnectedElement> out;
  out.push_back({x, 0.0});

  // Exchanging one antiparallel pair toggles exactly two bits, so distinct
  // pairs land on distinct configs; only the same unordered pair visited
  // twice (j and j+r coinciding mod n) accumulates.
  auto accumulate = [&](SpinConfig y, Real v) {
    for (auto& e : out) {
      if (e.config == y) {
        e.value += v;
        return;
      }
    }
    out.push_back({y, v});
  };

  const Real couplings[2] = {spec.j1, spec.j2};
  for (int r = 1; r <= 2; ++r) {
    const Real j = couplings[r - 1];
    if (j == 0.0) continue;
    for (int site = 0; site < n; ++site) {
      const int a = site;
      const int b = (site + r) % n;
      if (spin_at(x, a) == spin_at(x, b)) {
        out[0].value += j / 4.0;
      } else {
        out[0].value -= j / 4.0;
        accumulate(SpinConfig{x.bits ^ (1u << a) ^ (1u << b)}, j / 2.0);
      }
    }
  }
  return out;
}

Matrix dense_hamiltonian(const RingSpec& spec, const SectorBasis& basis) {
  const Index dim = basis.size();
  Matrix h = Matrix::Zero(dim, dim);
  for (Index col = 0; col < dim; ++col) {
    for (const auto& e : connected_elements(spec, basis.configs[col])) {
      h(basis.index_of(e.config), col) += e.value;
    }
  }
  return h;
}

EdResult exact_diagonalize(const Matrix& hamiltonian, Real degeneracy_tol) {
  if (hamiltonian.rows() != hamiltonian.cols()) {
    throw std::invalid_argument("hamiltonian must be square");
  }
  const Real scale = std::max(1.0, hamiltonian.cwiseAbs().maxCoeff());
  if ((hamiltonian - hamiltonian.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("hamiltonian must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hamiltonian);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigensolver failed to converge");
  }
  EdResult result;
  result.eigenvalues = solver.eigenvalues();
  result.eigenvectors = solver.eigenvectors();
  result.ground_energy = result.eigenvalues[0];
  const Real spread = result.eigenvalues[result.eigenvalues.size() - 1] - result.eigenvalues[0];
  const Real threshold = result.ground_energy + degeneracy_tol * spread;
  result.degeneracy = 0;
  for (Index i = 0; i < result.eigenvalues.size(); ++i) {
    if (result.eigenvalues[i] <= threshold) ++result.degeneracy;
  }
  result.ground_block = result.eigenvectors.leftCols(result.degeneracy);
  return result;
}

namespace {

// Product of singlet amplitudes over the bonds (offset, offset+1),
// (offset+2, offset+3), ...; zero when any bond holds parallel spins.
Real dimer_amplitude(SpinConfig x, int n, int offset) {
  Real amp = 1.0;
  const Real inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int m = 0; m < n / 2; ++m) {
    const int a = (2 * m + offset) % n;
    const int b = (2 * m + 1 + offset) % n;
    const int sa = spin_at(x, a);
    if (sa == spin_at(x, b)) return 0.0;
    amp *= (sa > 0 ? inv_sqrt2 : -inv_sqrt2);
  }
  return amp;
}

}  // namespace

DimerPair build_dimer_states(const SectorBasis& basis) {
  const Index dim = basis.size();
  DimerPair pair;
  pair.phi_a = ComplexVector::Zero(dim);
  pair.phi_b = ComplexVector::Zero(dim);
  for (Index i = 0; i < dim; ++i) {
    pair.phi_a[i] = dimer_amplitude(basis.configs[i], basis.n_sites, 0);
    pair.phi_b[i] = dimer_amplitude(basis.configs[i], basis.n_sites, 1);
  }
  pair.overlap = pair.phi_b.dot(pair.phi_a).real();
  return pair;
}

MomentumPair build_momentum_states(const SectorBasis& basis) {
  const DimerPair dimers = build_dimer_states(basis);
  MomentumPair pair;
  pair.psi_plus = (dimers.phi_a + dimers.phi_b) / std::sqrt(2.0 * (1.0 + dimers.overlap));
  pair.psi_minus = (dimers.phi_a - dimers.phi_b) / std::sqrt(2.0 * (1.0 - dimers.overlap));
  return pair;
}

ComplexVector translate_vector(const ComplexVector& v, const SectorBasis& basis) {
  if (v.size() != basis.size()) {
    throw std::invalid_argument("vector dimension does not match basis");
  }
  ComplexVector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    out[basis.index_of(translate(basis.configs[i], basis.n_sites))] = v[i];
  }
  return out;
}

}  // namespace nqsens::model
