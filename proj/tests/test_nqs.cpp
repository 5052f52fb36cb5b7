#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "nqsens/model.hpp"
#include "nqsens/nqs.hpp"

using namespace nqsens;
using namespace nqsens::nqs;

namespace {

// Straight-line oracle for the two-layer trunk: plain loops, no shared code
// with the Eigen implementation.
std::vector<Real> trunk_oracle(const TrunkParams& t, const Vector& spins) {
  const int h = t.width();
  const int n = t.input_dim();
  std::vector<Real> hidden(h, 0.0);
  for (int i = 0; i < h; ++i) {
    Real acc = t.b1[i];
    for (int j = 0; j < n; ++j) acc += t.w1(i, j) * spins[j];
    hidden[i] = acc > 0.0 ? acc : 0.0;
  }
  std::vector<Real> out(h, 0.0);
  for (int i = 0; i < h; ++i) {
    Real acc = t.b2[i];
    for (int j = 0; j < h; ++j) acc += t.w2(i, j) * hidden[j];
    out[i] = acc;
  }
  return out;
}

Ensemble random_ensemble(EnsembleMode mode, int n, int h, int k, std::uint64_t seed,
                         Real scale = 1.0) {
  Ensemble ens = init_ensemble(mode, n, h, k, seed);
  if (scale != 1.0) {
    Vector flat = flatten(ens);
    std::mt19937_64 rng(seed + 17);
    std::normal_distribution<Real> normal(0.0, scale);
    for (Index i = 0; i < flat.size(); ++i) flat[i] = normal(rng);
    unflatten(flat, ens);
  }
  return ens;
}

}  // namespace

TEST_CASE("trunk forward matches a straight-line oracle") {
  const int n = 6, h = 5;
  Ensemble ens = random_ensemble(EnsembleMode::SingleTrunk, n, h, 1, 3, 0.7);
  const auto basis = model::build_sector_basis(n);
  for (Index i = 0; i < basis.size(); ++i) {
    const Vector spins = model::to_spins(basis.configs[i], n);
    const Vector f = trunk_forward(ens.trunks[0], spins);
    const auto expected = trunk_oracle(ens.trunks[0], spins);
    for (int m = 0; m < h; ++m) CHECK(f[m] == doctest::Approx(expected[m]).epsilon(1e-13));
    const TrunkCache cache = trunk_forward_cached(ens.trunks[0], spins);
    CHECK((cache.features - f).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("head log psi and its parameter derivatives") {
  Vector f(3);
  f << 0.5, -1.0, 2.0;
  HeadParams head;
  head.alpha = Vector::Zero(3);
  head.alpha << 1.0, 2.0, 3.0;
  head.phi = Vector::Zero(3);
  head.phi << -1.0, 0.5, 0.25;
  head.beta = 0.1;
  head.gamma = -0.2;

  const Complex l = head_log_psi(head, f);
  CHECK(l.real() == doctest::Approx(0.5 - 2.0 + 6.0 + 0.1).epsilon(1e-14));
  CHECK(l.imag() == doctest::Approx(-0.5 - 0.5 + 0.5 - 0.2).epsilon(1e-14));

  const HeadLogDerivatives d = head_log_derivatives(head, f);
  const Real eps = 1e-7;
  for (int m = 0; m < 3; ++m) {
    HeadParams hp = head, hm = head;
    hp.alpha[m] += eps;
    hm.alpha[m] -= eps;
    const Complex fd = (head_log_psi(hp, f) - head_log_psi(hm, f)) / (2 * eps);
    CHECK(std::abs(d.alpha[m] - fd) < 1e-7);
    hp = head;
    hm = head;
    hp.phi[m] += eps;
    hm.phi[m] -= eps;
    const Complex fd_phi = (head_log_psi(hp, f) - head_log_psi(hm, f)) / (2 * eps);
    CHECK(std::abs(d.phi[m] - fd_phi) < 1e-7);
  }
  CHECK(d.beta == Complex(1.0, 0.0));
  CHECK(d.gamma == Complex(0.0, 1.0));
}

TEST_CASE("trunk vjp matches finite differences of cotangent . features") {
  const int n = 4, h = 6;
  Ensemble ens = random_ensemble(EnsembleMode::SingleTrunk, n, h, 1, 11, 0.6);
  TrunkParams& trunk = ens.trunks[0];
  const Vector spins = model::to_spins(model::SpinConfig{0b0110}, n);

  // keep the probe away from relu kinks so central differences are valid
  REQUIRE((trunk.w1 * spins + trunk.b1).cwiseAbs().minCoeff() > 1e-3);

  std::mt19937_64 rng(5);
  std::normal_distribution<Real> normal(0.0, 1.0);
  Vector cot(h);
  for (int i = 0; i < h; ++i) cot[i] = normal(rng);

  TrunkGrads grads = zero_like(trunk);
  trunk_vjp(trunk, trunk_forward_cached(trunk, spins), cot, grads);

  const Real eps = 1e-6;
  auto value = [&]() { return cot.dot(trunk_forward(trunk, spins)); };
  auto check_entry = [&](Real& param, Real grad) {
    const Real saved = param;
    param = saved + eps;
    const Real up = value();
    param = saved - eps;
    const Real down = value();
    param = saved;
    CHECK(grad == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-5).scale(1.0));
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < n; ++c) check_entry(trunk.w1(r, c), grads.w1(r, c));
    check_entry(trunk.b1[r], grads.b1[r]);
    for (int c = 0; c < h; ++c) check_entry(trunk.w2(r, c), grads.w2(r, c));
    check_entry(trunk.b2[r], grads.b2[r]);
  }
}

TEST_CASE("relu subgradient at exactly zero preactivation is zero") {
  TrunkParams trunk;
  trunk.w1 = Matrix::Ones(2, 2);
  trunk.b1 = Vector::Zero(2);
  trunk.w2 = Matrix::Identity(2, 2);
  trunk.b2 = Vector::Zero(2);
  Vector spins(2);
  spins << 1.0, -1.0;  // pre1 = (0, 0) exactly

  TrunkGrads grads = zero_like(trunk);
  Vector cot = Vector::Ones(2);
  trunk_vjp(trunk, trunk_forward_cached(trunk, spins), cot, grads);
  CHECK(grads.w1.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.b1.cwiseAbs().maxCoeff() == 0.0);
  // downstream of the kink the gradient is unaffected
  CHECK(grads.b2.cwiseAbs().maxCoeff() == 1.0);
}

TEST_CASE("parameter counts: exact and theory") {
  const ParamCount st = exact_param_count(EnsembleMode::SingleTrunk, 4, 32, 2);
  CHECK(st.theory == 1312);  // (N+1) h + h^2 + 2 K h
  const ParamCount mt = exact_param_count(EnsembleMode::MultiTrunk, 4, 32, 2);
  CHECK(mt.theory == 2496);  // K ((N+1) h + h^2 + 2 h)

  for (int k = 1; k <= 6; ++k) {
    for (auto mode : {EnsembleMode::SingleTrunk, EnsembleMode::MultiTrunk}) {
      const Ensemble ens = init_ensemble(mode, 4, 32, k, 9);
      CHECK(flat_size(ens) == exact_param_count(mode, 4, 32, k).exact);
    }
  }
  // one head: both layouts store the same scalars
  CHECK(exact_param_count(EnsembleMode::SingleTrunk, 6, 8, 1).exact ==
        exact_param_count(EnsembleMode::MultiTrunk, 6, 8, 1).exact);
}

TEST_CASE("flat layout is trunk blocks then per-head alpha, phi, beta, gamma") {
  Ensemble ens;
  ens.mode = EnsembleMode::SingleTrunk;
  TrunkParams t;
  t.w1 = Matrix(1, 2);
  t.w1 << 1.0, 2.0;   // row-major
  t.b1 = Vector::Constant(1, 3.0);
  t.w2 = Matrix(1, 1);
  t.w2 << 4.0;
  t.b2 = Vector::Constant(1, 5.0);
  ens.trunks = {t};
  HeadParams h1{Vector::Constant(1, 6.0), Vector::Constant(1, 7.0), 8.0, 9.0};
  HeadParams h2{Vector::Constant(1, 10.0), Vector::Constant(1, 11.0), 12.0, 13.0};
  ens.heads = {h1, h2};

  const Vector flat = flatten(ens);
  REQUIRE(flat.size() == 13);
  for (Index i = 0; i < 13; ++i) CHECK(flat[i] == Real(i + 1));

  Ensemble copy = ens;
  Vector shifted = flat.array() + 0.5;
  unflatten(shifted, copy);
  CHECK(flatten(copy) == shifted);
  CHECK_THROWS_AS(unflatten(Vector::Zero(5), copy), std::invalid_argument);
}

TEST_CASE("initialization structure and determinism") {
  const Ensemble a = init_ensemble(EnsembleMode::SingleTrunk, 6, 16, 3, 42);
  const Ensemble b = init_ensemble(EnsembleMode::SingleTrunk, 6, 16, 3, 42);
  CHECK(flatten(a) == flatten(b));
  const Ensemble c = init_ensemble(EnsembleMode::SingleTrunk, 6, 16, 3, 43);
  CHECK(flatten(a) != flatten(c));

  CHECK(a.trunks[0].b1.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.trunks[0].b2.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& head : a.heads) {
    CHECK(head.beta == 0.0);
    CHECK(head.gamma == 0.0);
    CHECK(head.alpha.cwiseAbs().maxCoeff() < 0.1);
    CHECK(head.alpha.cwiseAbs().maxCoeff() > 0.0);
  }
  // weight scale sanity: sample std near 1/sqrt(fan-in)
  const Real std_w1 = std::sqrt(a.trunks[0].w1.array().square().mean());
  CHECK(std_w1 == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(0.25));

  // single- and multi-trunk draws coincide for one head
  const Ensemble st1 = init_ensemble(EnsembleMode::SingleTrunk, 4, 8, 1, 7);
  const Ensemble mt1 = init_ensemble(EnsembleMode::MultiTrunk, 4, 8, 1, 7);
  CHECK(flatten(st1) == flatten(mt1));
}

TEST_CASE("multi-trunk forward equals single-trunk when trunks are copies") {
  const int n = 4, h = 8, k = 3;
  Ensemble st = random_ensemble(EnsembleMode::SingleTrunk, n, h, k, 21);
  Ensemble mt;
  mt.mode = EnsembleMode::MultiTrunk;
  mt.trunks.assign(k, st.trunks[0]);
  mt.heads = st.heads;

  const auto basis = model::build_sector_basis(n);
  for (Index i = 0; i < basis.size(); ++i) {
    const Vector spins = model::to_spins(basis.configs[i], n);
    const ComplexVector ls = log_psi(st, spins);
    const ComplexVector lm = log_psi(mt, spins);
    CHECK((ls - lm).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("checkpoint round-trip is bit exact") {
  const auto dir = std::filesystem::temp_directory_path() / "nqsens_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "ensemble.json";

  for (auto mode : {EnsembleMode::SingleTrunk, EnsembleMode::MultiTrunk}) {
    Ensemble ens = random_ensemble(mode, 6, 5, 2, 31, 0.9);
    // exercise values that stress the decimal round-trip
    ens.heads[0].beta = 1.0 / 3.0;
    ens.heads[0].gamma = -1e-300;
    ens.heads[1].beta = 0.1 + 0.2;
    save_checkpoint(ens, path);
    const Ensemble loaded = load_checkpoint(path);
    CHECK(loaded.mode == ens.mode);
    CHECK(flatten(loaded) == flatten(ens));
  }

  std::ofstream(dir / "bad.json") << "{\"mode\": \"st-mh\"";
  CHECK_THROWS(load_checkpoint(dir / "bad.json"));
  std::ofstream(dir / "short.json")
      << R"({"mode": "st-mh", "n_sites": 4, "width": 2, "n_heads": 1, "params": [1.0]})";
  CHECK_THROWS(load_checkpoint(dir / "short.json"));
  std::filesystem::remove_all(dir);
}
