#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "nqsens/model.hpp"
#include "nqsens/nqs.hpp"
#include "nqsens/sampler.hpp"
#include "nqsens/trainer.hpp"

using namespace nqsens;
using namespace nqsens::trainer;

namespace {

nqs::Ensemble randomized(nqs::EnsembleMode mode, int n, int h, int k, std::uint64_t seed,
                         Real scale) {
  nqs::Ensemble ens = nqs::init_ensemble(mode, n, h, k, seed);
  Vector flat = nqs::flatten(ens);
  std::mt19937_64 rng(seed + 1234);
  std::normal_distribution<Real> normal(0.0, scale);
  for (Index i = 0; i < flat.size(); ++i) flat[i] = normal(rng);
  nqs::unflatten(flat, ens);
  return ens;
}

// Head amplitudes over the whole sector, for brute-force references.
ComplexVector head_vector(const nqs::Ensemble& ens, const model::SectorBasis& basis, int head) {
  ComplexVector psi(basis.size());
  for (Index i = 0; i < basis.size(); ++i)
    psi[i] = std::exp(nqs::log_psi(ens, model::to_spins(basis.configs[i], basis.n_sites))[head]);
  return psi;
}

Real smallest_preactivation(const nqs::Ensemble& ens, const model::SectorBasis& basis) {
  Real smallest = std::numeric_limits<Real>::infinity();
  for (Index i = 0; i < basis.size(); ++i) {
    const Vector spins = model::to_spins(basis.configs[i], basis.n_sites);
    for (const auto& trunk : ens.trunks)
      smallest = std::min(smallest, (trunk.w1 * spins + trunk.b1).cwiseAbs().minCoeff());
  }
  return smallest;
}

}  // namespace

TEST_CASE("penalty form names round-trip") {
  for (auto form : {PenaltyForm::Frobenius, PenaltyForm::HalfOffDiagonal})
    CHECK(penalty_form_from_name(penalty_form_name(form)) == form);
  CHECK_THROWS_AS(penalty_form_from_name("L1"), std::invalid_argument);
}

TEST_CASE("local energy agrees with the dense Hamiltonian") {
  for (int n : {4, 6}) {
    const model::RingSpec ring{n, 1.0, 0.5};
    const auto basis = model::build_sector_basis(n);
    const Matrix h = model::dense_hamiltonian(ring, basis);
    const auto ens = randomized(nqs::EnsembleMode::SingleTrunk, n, 5, 2, 2, 0.4);
    for (int head = 0; head < 2; ++head) {
      const ComplexVector psi = head_vector(ens, basis, head);
      const ComplexVector h_psi = h * psi;
      for (Index i = 0; i < basis.size(); ++i) {
        const Complex expected = h_psi[i] / psi[i];
        const Complex got = local_energy(ens, head, ring, basis.configs[i]);
        CHECK(std::abs(got - expected) < 1e-10 * (1.0 + std::abs(expected)));
      }
    }
  }
  const auto ens = randomized(nqs::EnsembleMode::SingleTrunk, 4, 3, 1, 3, 0.3);
  CHECK_THROWS_AS(local_energy(ens, 1, model::RingSpec{4, 1.0, 0.5}, model::SpinConfig{0b0101}),
                  std::invalid_argument);
}

TEST_CASE("full-sum estimates reproduce Rayleigh quotients and exact overlaps") {
  const model::RingSpec ring{6, 1.0, 0.5};
  const auto basis = model::build_sector_basis(6);
  const Matrix h = model::dense_hamiltonian(ring, basis);
  const auto ens = randomized(nqs::EnsembleMode::SingleTrunk, 6, 6, 3, 4, 0.4);

  std::vector<sampler::SampleBatch> batches;
  batches.push_back(sampler::full_sum_batch(ens, 6));
  const StepEstimates est = estimate_step(ens, ring, batches, PenaltyForm::Frobenius);

  for (int k = 0; k < 3; ++k) {
    const ComplexVector psi = head_vector(ens, basis, k);
    const Real rayleigh = (psi.adjoint() * h * psi)(0).real() / psi.squaredNorm();
    CHECK(est.energies[k].real() == doctest::Approx(rayleigh).epsilon(1e-10));
    CHECK(std::abs(est.energies[k].imag()) < 1e-10);
    for (int l = 0; l < 3; ++l) {
      const ComplexVector phi = head_vector(ens, basis, l);
      const Complex expected =
          k == l ? Complex(1.0, 0.0) : (psi.adjoint() * phi)(0) / psi.squaredNorm();
      CHECK(std::abs(est.sigma(k, l) - expected) < 1e-12 * (1.0 + std::abs(expected)));
    }
  }
  CHECK(est.tau >= 0.0);
  CHECK(std::isfinite(est.tau));
}

TEST_CASE("penalty values and Frobenius deviation") {
  ComplexMatrix sigma = ComplexMatrix::Identity(2, 2);
  sigma(0, 1) = Complex(0.3, -0.4);  // |.|^2 = 0.25
  sigma(1, 0) = Complex(0.0, 0.2);   // |.|^2 = 0.04
  CHECK(penalty_value(sigma, PenaltyForm::Frobenius) == doctest::Approx(0.29).epsilon(1e-14));
  CHECK(penalty_value(sigma, PenaltyForm::HalfOffDiagonal) ==
        doctest::Approx(0.145).epsilon(1e-14));
  CHECK(frob_deviation(sigma) == doctest::Approx(std::sqrt(0.29)).epsilon(1e-14));
  // a drifting diagonal counts toward the full form only
  sigma(1, 1) = Complex(0.9, 0.0);
  CHECK(penalty_value(sigma, PenaltyForm::Frobenius) == doctest::Approx(0.30).epsilon(1e-13));
  CHECK(penalty_value(sigma, PenaltyForm::HalfOffDiagonal) ==
        doctest::Approx(0.145).epsilon(1e-14));
}

TEST_CASE("overlap noise scale matches its defining double sum") {
  const auto ens = randomized(nqs::EnsembleMode::SingleTrunk, 4, 4, 2, 6, 0.4);
  sampler::SamplerConfig scfg;
  scfg.n_samples = 128;
  scfg.n_chains = 4;
  scfg.sweeps = 2;
  scfg.burn_in = 30;
  scfg.seed = 7;
  std::vector<sampler::SampleBatch> batches;
  batches.push_back(sampler::sample_mixture(ens, 4, scfg));
  const model::RingSpec ring{4, 1.0, 0.5};
  const StepEstimates est = estimate_step(ens, ring, batches, PenaltyForm::Frobenius);

  Real acc = 0.0;
  for (int k = 0; k < 2; ++k) {
    for (int l = 0; l < 2; ++l) {
      if (l == k) continue;
      Real spread = 0.0;
      for (Index i = 0; i < 128; ++i) {
        const Real w = batches[0].weights(k, i);
        if (w <= 0.0) continue;
        const ComplexVector logs =
            nqs::log_psi(ens, model::to_spins(batches[0].configs[i], 4));
        spread += w * std::norm(std::exp(logs[l] - logs[k]) - est.sigma(k, l));
      }
      acc += spread / est.ess[k];
    }
  }
  CHECK(est.tau == doctest::Approx(std::sqrt(acc)).epsilon(1e-12));
  CHECK(est.tau > 0.0);
}

TEST_CASE("penalty weight ramps linearly then holds") {
  TrainConfig cfg;
  cfg.lambda_start = 0.1;
  cfg.lambda_final = 0.5;
  cfg.anneal_steps = 100;
  CHECK(lambda_at(cfg, 0) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(lambda_at(cfg, 50) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(lambda_at(cfg, 100) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(lambda_at(cfg, 5000) == doctest::Approx(0.5).epsilon(1e-14));
  cfg.anneal_steps = 0;
  CHECK(lambda_at(cfg, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("adam steps match the bias-corrected update") {
  Vector params(2);
  params << 1.0, -2.0;
  Vector g1(2);
  g1 << 0.5, -1.5;
  AdamState state;
  adam_step(params, g1, state, 0.1);
  // after one step the bias corrections cancel: update = lr * g / (|g| + eps')
  for (int i = 0; i < 2; ++i) {
    const Real m_hat = g1[i];
    const Real v_hat = g1[i] * g1[i];
    const Real expected = (i == 0 ? 1.0 : -2.0) - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(params[i] == doctest::Approx(expected).epsilon(1e-12));
  }
  // second step against a from-scratch recomputation
  Vector g2(2);
  g2 << -0.25, 0.75;
  Vector before = params;
  adam_step(params, g2, state, 0.1);
  for (int i = 0; i < 2; ++i) {
    const Real m = 0.9 * (0.1 * g1[i]) + 0.1 * g2[i];
    const Real v = 0.999 * (0.001 * g1[i] * g1[i]) + 0.001 * g2[i] * g2[i];
    const Real expected =
        before[i] - 0.1 * (m / (1.0 - 0.81)) / (std::sqrt(v / (1.0 - 0.999 * 0.999)) + 1e-8);
    CHECK(params[i] == doctest::Approx(expected).epsilon(1e-10));
  }
  CHECK(state.t == 2);
  CHECK_THROWS_AS(adam_step(params, Vector::Zero(3), state, 0.1), std::invalid_argument);
}

TEST_CASE("assembled gradient matches finite differences of the exact loss") {
  const model::RingSpec ring{4, 1.0, 0.5};
  struct Case {
    nqs::EnsembleMode mode;
    PenaltyForm form;
    Real lambda;
    Vector head_weights;
  };
  std::vector<Case> cases;
  cases.push_back({nqs::EnsembleMode::SingleTrunk, PenaltyForm::Frobenius, 0.3, Vector()});
  cases.push_back({nqs::EnsembleMode::SingleTrunk, PenaltyForm::HalfOffDiagonal, 0.3, Vector()});
  cases.push_back({nqs::EnsembleMode::SingleTrunk, PenaltyForm::Frobenius, 0.0, Vector()});
  cases.push_back({nqs::EnsembleMode::MultiTrunk, PenaltyForm::Frobenius, 0.3, Vector()});
  Vector uneven(2);
  uneven << 0.7, 0.3;
  cases.push_back({nqs::EnsembleMode::SingleTrunk, PenaltyForm::Frobenius, 0.3, uneven});

  for (const auto& test_case : cases) {
    CAPTURE(static_cast<int>(test_case.mode));
    CAPTURE(static_cast<int>(test_case.form));
    CAPTURE(test_case.lambda);
    nqs::Ensemble ens = randomized(test_case.mode, 4, 2, 2, 15, 0.5);
    const auto basis = model::build_sector_basis(4);
    REQUIRE(smallest_preactivation(ens, basis) > 1e-3);  // keep differences off relu kinks

    TrainConfig cfg;
    cfg.penalty_form = test_case.form;
    cfg.head_weights = test_case.head_weights;

    std::vector<sampler::SampleBatch> batches;
    batches.push_back(sampler::full_sum_batch(ens, 4));
    const GradientResult result =
        assemble_gradient(ens, ring, batches, test_case.lambda, cfg);

    Vector flat = nqs::flatten(ens);
    Vector fd(flat.size());
    const Real eps = 1e-5;
    nqs::Ensemble probe = ens;
    for (Index i = 0; i < flat.size(); ++i) {
      const Real saved = flat[i];
      flat[i] = saved + eps;
      nqs::unflatten(flat, probe);
      const Real up = full_sum_loss(probe, ring, test_case.lambda, cfg);
      flat[i] = saved - eps;
      nqs::unflatten(flat, probe);
      const Real down = full_sum_loss(probe, ring, test_case.lambda, cfg);
      flat[i] = saved;
      fd[i] = (up - down) / (2.0 * eps);
    }
    nqs::unflatten(flat, probe);

    // relative error with a floor tied to the gradient scale, so parameters
    // with an exactly zero derivative only see finite-difference roundoff
    const Real floor = 1e-4 * (1.0 + fd.cwiseAbs().maxCoeff());
    Real worst = 0.0;
    for (Index i = 0; i < flat.size(); ++i) {
      const Real denom = std::max({std::abs(result.gradient[i]), std::abs(fd[i]), floor});
      worst = std::max(worst, std::abs(result.gradient[i] - fd[i]) / denom);
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("log-ratio clamping keeps far-apart heads finite") {
  const model::RingSpec ring{4, 1.0, 0.5};
  nqs::Ensemble ens = randomized(nqs::EnsembleMode::SingleTrunk, 4, 3, 2, 20, 0.2);
  ens.heads[1].beta = 60.0;  // log ratio between heads exceeds the clamp

  std::vector<sampler::SampleBatch> batches;
  batches.push_back(sampler::full_sum_batch(ens, 4));
  TrainConfig cfg;
  const GradientResult result = assemble_gradient(ens, ring, batches, 0.3, cfg);
  // every config clamps once per ordered head pair
  CHECK(result.estimates.clamp_events == 12);
  CHECK(result.gradient.allFinite());
  CHECK(std::isfinite(result.estimates.penalty));
}

TEST_CASE("underflowed weight rows are skipped without poisoning estimates") {
  const model::RingSpec ring{4, 1.0, 0.5};
  const auto ens = randomized(nqs::EnsembleMode::SingleTrunk, 4, 3, 2, 21, 0.3);
  std::vector<sampler::SampleBatch> batches;
  batches.push_back(sampler::full_sum_batch(ens, 4));
  batches[0].weights.row(1).setZero();
  batches[0].ess[1] = 0.0;

  const GradientResult result = assemble_gradient(ens, ring, batches, 0.3, TrainConfig{});
  CHECK(result.estimates.energies[1] == Complex(0.0, 0.0));
  CHECK(result.estimates.sigma(1, 0) == Complex(0.0, 0.0));
  CHECK(result.gradient.allFinite());
}

TEST_CASE("exact-sum training resolves the four-site ground energy") {
  const model::RingSpec ring{4, 1.0, 0.5};
  const nqs::Ensemble init = nqs::init_ensemble(nqs::EnsembleMode::SingleTrunk, 4, 4, 2, 1);

  TrainOptions opts;
  opts.train.learning_rate = 1e-2;
  opts.train.steps = 400;
  opts.train.lambda_start = 1e-3;
  opts.train.lambda_final = 0.5;
  opts.train.anneal_steps = 200;
  opts.sampler.mode = sampler::SampleMode::FullSum;
  opts.seed = 1;

  const TrainResult result = train(init, ring, opts);
  REQUIRE(result.trace.size() == 400);
  const TraceRow& last = result.trace.back();
  CHECK(last.energies[0] == doctest::Approx(-1.5).epsilon(0.02));
  CHECK(last.energies[1] == doctest::Approx(-1.5).epsilon(0.02));
  CHECK(last.frob_dev < 0.05);
  CHECK(last.lambda == doctest::Approx(0.5));
  for (const auto& row : result.trace) CHECK(row.energies.allFinite());
}

TEST_CASE("sampled training is deterministic in the seed") {
  const model::RingSpec ring{4, 1.0, 0.5};
  const nqs::Ensemble init = nqs::init_ensemble(nqs::EnsembleMode::SingleTrunk, 4, 4, 2, 5);

  TrainOptions opts;
  opts.train.steps = 25;
  opts.train.anneal_steps = 10;
  opts.sampler.n_samples = 64;
  opts.sampler.n_chains = 4;
  opts.sampler.sweeps = 2;
  opts.sampler.burn_in = 20;
  opts.seed = 77;

  const TrainResult a = train(init, ring, opts);
  const TrainResult b = train(init, ring, opts);
  CHECK(nqs::flatten(a.ensemble) == nqs::flatten(b.ensemble));
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].energies == b.trace[i].energies);
    CHECK(a.trace[i].frob_dev == b.trace[i].frob_dev);
  }

  opts.seed = 78;
  const TrainResult c = train(init, ring, opts);
  CHECK(nqs::flatten(a.ensemble) != nqs::flatten(c.ensemble));
}

TEST_CASE("one-head training is identical across trunk layouts") {
  const model::RingSpec ring{4, 1.0, 0.5};
  const nqs::Ensemble st = nqs::init_ensemble(nqs::EnsembleMode::SingleTrunk, 4, 6, 1, 9);
  const nqs::Ensemble mt = nqs::init_ensemble(nqs::EnsembleMode::MultiTrunk, 4, 6, 1, 9);
  REQUIRE(nqs::flatten(st) == nqs::flatten(mt));

  TrainOptions opts;
  opts.train.steps = 30;
  opts.sampler.n_samples = 48;
  opts.sampler.n_chains = 4;
  opts.sampler.sweeps = 2;
  opts.sampler.burn_in = 15;
  opts.seed = 33;

  const TrainResult a = train(st, ring, opts);
  const TrainResult b = train(mt, ring, opts);
  CHECK(nqs::flatten(a.ensemble) == nqs::flatten(b.ensemble));
}

TEST_CASE("trace files carry the frozen column set") {
  std::vector<TraceRow> trace(2);
  trace[0].step = 0;
  trace[0].energies = Vector::Constant(2, -1.25);
  trace[0].frob_dev = 0.5;
  trace[0].lambda = 0.001;
  trace[0].ess = Vector::Constant(2, 64.0);
  trace[0].seconds = 0.01;
  trace[1] = trace[0];
  trace[1].step = 1;

  const auto path = std::filesystem::temp_directory_path() / "nqsens_trace_test.csv";
  write_trace_csv(trace, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,E_1,E_2,frob_dev,lambda,ess_1,ess_2,seconds");
  int rows = 0;
  std::string line;
  while (std::getline(in, line) && !line.empty()) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 7);
  }
  CHECK(rows == 2);
  std::filesystem::remove(path);
}
