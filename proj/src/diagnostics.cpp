#include "nqsens/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nqsens::diagnostics {

namespace {

constexpr Real kRankTol = 1e-8;

struct SupportFamily {
  std::vector<Index> rows;  // sector indices of the common support
  Matrix g;                 // log moduli, one column per state
  Matrix omega;             // principal-branch phases after rotation
  Vector rotation;          // applied global phase angle per state
};

int family_rank(const std::vector<const Matrix*>& blocks, Index rows);

SupportFamily common_support_family(const ComplexMatrix& states, Real support_tol) {
  const Index n_states = states.cols();
  if (n_states < 1) throw std::invalid_argument("rank analysis needs at least one state");

  Vector thresholds(n_states);
  for (Index k = 0; k < n_states; ++k) {
    const Real peak = states.col(k).cwiseAbs().maxCoeff();
    if (peak <= 0.0) throw std::invalid_argument("state is identically zero");
    thresholds[k] = support_tol * peak;
  }

  SupportFamily family;
  for (Index i = 0; i < states.rows(); ++i) {
    bool everywhere = true;
    for (Index k = 0; k < n_states; ++k)
      if (std::abs(states(i, k)) <= thresholds[k]) {
        everywhere = false;
        break;
      }
    if (everywhere) family.rows.push_back(i);
  }
  if (family.rows.empty()) throw std::invalid_argument("states share no common support");

  const Index support = static_cast<Index>(family.rows.size());
  family.g = Matrix(support, n_states);
  family.omega = Matrix(support, n_states);
  family.rotation = Vector(n_states);
  for (Index k = 0; k < n_states; ++k)
    for (Index s = 0; s < support; ++s)
      family.g(s, k) = std::log(std::abs(states(family.rows[s], k)));

  // Phases are only defined modulo 2 pi, so the affine structure survives the
  // principal branch only when the cut falls in an empty arc of each state's
  // phase distribution. Every gap between adjacent observed phases offers one
  // candidate rotation; take the candidate that keeps the joint rank of the
  // family smallest, which recovers the generating affine phases whenever
  // some global rotation does. Per-row 2 pi lifts are deliberately not
  // searched, so a state whose generating phases spread beyond one turn
  // reports an upper bound on its rank.
  Matrix chosen(support, 0);
  for (Index k = 0; k < n_states; ++k) {
    std::vector<Real> sorted(support);
    for (Index s = 0; s < support; ++s) sorted[s] = std::arg(states(family.rows[s], k));
    std::sort(sorted.begin(), sorted.end());

    int best_rank = std::numeric_limits<int>::max();
    Real best_gap = -1.0, best_angle = 0.0;
    Vector best_omega(support);
    Matrix trial(support, chosen.cols() + 1);
    trial.leftCols(chosen.cols()) = chosen;
    for (Index j = 0; j < support; ++j) {
      const bool wrap = j + 1 == support;
      const Real gap = (wrap ? sorted[0] + 2 * EIGEN_PI : sorted[j + 1]) - sorted[j];
      if (gap <= 0.0 && support > 1) continue;  // coincident phases offer no cut
      const Real angle = EIGEN_PI - (sorted[j] + 0.5 * gap);
      const Complex factor = std::polar(1.0, angle);
      for (Index s = 0; s < support; ++s)
        trial(s, chosen.cols()) = std::arg(states(family.rows[s], k) * factor);
      const int rank = family_rank({&family.g, &trial}, support);
      if (rank < best_rank || (rank == best_rank && gap > best_gap)) {
        best_rank = rank;
        best_gap = gap;
        best_angle = angle;
        best_omega = trial.col(chosen.cols());
      }
    }

    family.rotation[k] = best_angle;
    family.omega.col(k) = best_omega;
    chosen.conservativeResize(support, chosen.cols() + 1);
    chosen.col(chosen.cols() - 1) = best_omega;
  }
  return family;
}

int family_rank(const std::vector<const Matrix*>& blocks, Index rows) {
  Index cols = 1;
  for (const Matrix* block : blocks) cols += block->cols();
  Matrix stacked(rows, cols);
  stacked.col(0).setOnes();
  Index at = 1;
  for (const Matrix* block : blocks) {
    stacked.middleCols(at, block->cols()) = *block;
    at += block->cols();
  }
  Eigen::JacobiSVD<Matrix> svd(stacked);
  const Vector& sv = svd.singularValues();
  int rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv[i] > kRankTol * sv[0]) ++rank;
  return rank;
}

}  // namespace

ComplexVector head_state_vector(const nqs::Ensemble& ens, const model::SectorBasis& basis,
                                int head) {
  if (head < 0 || head >= ens.n_heads()) throw std::invalid_argument("head out of range");
  ComplexVector logs(basis.size());
  for (Index i = 0; i < basis.size(); ++i)
    logs[i] = nqs::log_psi(ens, model::to_spins(basis.configs[i], basis.n_sites))[head];
  const Real shift = logs.real().maxCoeff();
  ComplexVector amps(basis.size());
  for (Index i = 0; i < basis.size(); ++i) amps[i] = std::exp(logs[i] - shift);
  return amps / amps.norm();
}

ComplexMatrix head_state_matrix(const nqs::Ensemble& ens, const model::SectorBasis& basis) {
  ComplexMatrix states(basis.size(), ens.n_heads());
  for (int k = 0; k < ens.n_heads(); ++k) states.col(k) = head_state_vector(ens, basis, k);
  return states;
}

EnergyMoments energy_and_variance(const ComplexVector& state, const Matrix& hamiltonian) {
  const Real norm2 = state.squaredNorm();
  if (norm2 <= 0.0) throw std::invalid_argument("cannot take moments of the zero state");
  const ComplexVector h_state = hamiltonian * state;
  const Real energy = state.dot(h_state).real() / norm2;
  const Real second = h_state.squaredNorm() / norm2;
  return {energy, second - energy * energy};
}

ComplexMatrix exact_overlap_matrix(const ComplexMatrix& states) {
  const Index n_states = states.cols();
  ComplexMatrix sigma(n_states, n_states);
  for (Index k = 0; k < n_states; ++k) {
    const Real norm2 = states.col(k).squaredNorm();
    for (Index l = 0; l < n_states; ++l)
      sigma(k, l) = states.col(k).dot(states.col(l)) / norm2;
  }
  return sigma;
}

Real fidelity(const ComplexVector& a, const ComplexVector& b) {
  return std::norm(a.dot(b)) / (a.squaredNorm() * b.squaredNorm());
}

ComplexVector align_global_phase(const ComplexVector& reference, const ComplexVector& state) {
  const Complex overlap = reference.dot(state);
  if (std::abs(overlap) == 0.0) return state;
  return state * (std::conj(overlap) / std::abs(overlap));
}

ProjectionMetrics projection_metrics(const ComplexMatrix& states, const Matrix& ground_block) {
  if (states.rows() != ground_block.rows())
    throw std::invalid_argument("states and ground block live on different bases");
  const Index n_states = states.cols();

  ProjectionMetrics metrics;
  metrics.fidelities = Vector(n_states);
  ComplexMatrix frame(states.rows(), n_states);
  for (Index k = 0; k < n_states; ++k) {
    const ComplexVector projected = ground_block * (ground_block.transpose() * states.col(k));
    const Real inside = projected.squaredNorm();
    metrics.fidelities[k] = inside / states.col(k).squaredNorm();
    frame.col(k) = inside > 0.0 ? ComplexVector(projected / std::sqrt(inside))
                                : ComplexVector::Zero(states.rows());
  }
  metrics.f_mean = metrics.fidelities.mean();
  metrics.f_min = metrics.fidelities.minCoeff();

  Eigen::JacobiSVD<ComplexMatrix> svd(frame);
  const Vector& sv = svd.singularValues();
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv[0] > 0.0 && sv[i] > kRankTol * sv[0]) ++metrics.rank;
    if (sv[i] >= 0.99) ++metrics.d_eff;
  }
  metrics.sigma_min = sv[sv.size() - 1];
  metrics.kappa = metrics.sigma_min > 0.0 ? sv[0] / metrics.sigma_min
                                          : std::numeric_limits<Real>::infinity();
  return metrics;
}

RankReport rank_analysis(const ComplexMatrix& states, Real support_tol) {
  const SupportFamily family = common_support_family(states, support_tol);
  RankReport report;
  report.support_size = static_cast<Index>(family.rows.size());
  report.r_g = family_rank({&family.g}, report.support_size);
  report.r_omega = family_rank({&family.omega}, report.support_size);
  report.r_both = family_rank({&family.g, &family.omega}, report.support_size);
  report.h_star = report.r_both - 1;
  return report;
}

TabularEnsemble construct_representing_ensemble(const ComplexMatrix& states,
                                                const model::SectorBasis& basis, int width,
                                                Real support_tol) {
  if (states.rows() != basis.size())
    throw std::invalid_argument("states do not live on the given basis");
  if (width < 0) throw std::invalid_argument("width must be nonnegative");
  const SupportFamily family = common_support_family(states, support_tol);
  const Index support = static_cast<Index>(family.rows.size());
  const Index n_states = states.cols();

  // Gram-Schmidt screen, seeded with the constant vector: a raw column joins
  // the feature set only if it adds a direction. Two projection passes keep
  // the orthogonal residuals clean.
  std::vector<Vector> ortho{Vector::Constant(support, 1.0 / std::sqrt(Real(support)))};
  std::vector<Vector> kept;
  auto screen = [&](const Vector& column) {
    Vector residual = column;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& q : ortho) residual -= q.dot(residual) * q;
    if (residual.norm() > 1e-10 * (1.0 + column.norm())) {
      ortho.push_back(residual / residual.norm());
      kept.push_back(column);
    }
  };
  for (Index k = 0; k < n_states; ++k) screen(family.g.col(k));
  for (Index k = 0; k < n_states; ++k) screen(family.omega.col(k));

  if (static_cast<Index>(kept.size()) > width)
    throw std::invalid_argument("width " + std::to_string(width) +
                                " cannot represent a family of affine rank " +
                                std::to_string(kept.size() + 1));

  TabularEnsemble table;
  table.support.reserve(support);
  for (const Index row : family.rows) table.support.push_back(basis.configs[row]);
  table.features = Matrix::Zero(support, width);
  for (std::size_t j = 0; j < kept.size(); ++j) table.features.col(j) = kept[j];

  Matrix design(support, width + 1);
  design.col(0).setOnes();
  design.rightCols(width) = table.features;
  const auto solver = design.colPivHouseholderQr();

  table.heads.reserve(n_states);
  for (Index k = 0; k < n_states; ++k) {
    const Vector re = solver.solve(family.g.col(k));
    const Vector im = solver.solve(family.omega.col(k));
    nqs::HeadParams head;
    head.alpha = re.tail(width);
    head.beta = re[0];
    head.phi = im.tail(width);
    // undo the branch-cut rotation so the table reproduces the input states
    head.gamma = im[0] - family.rotation[k];
    table.heads.push_back(std::move(head));
  }
  return table;
}

ComplexVector tabular_state_vector(const TabularEnsemble& table, const model::SectorBasis& basis,
                                   int head) {
  if (head < 0 || head >= table.n_heads()) throw std::invalid_argument("head out of range");
  const nqs::HeadParams& params = table.heads[head];
  ComplexVector state = ComplexVector::Zero(basis.size());
  for (std::size_t s = 0; s < table.support.size(); ++s) {
    const Index i = basis.index_of(table.support[s]);
    if (i < 0) throw std::invalid_argument("support configuration outside the basis");
    const Vector f = table.features.row(static_cast<Index>(s)).transpose();
    state[i] = std::exp(Complex(params.alpha.dot(f) + params.beta,
                                params.phi.dot(f) + params.gamma));
  }
  return state;
}

}  // namespace nqsens::diagnostics
