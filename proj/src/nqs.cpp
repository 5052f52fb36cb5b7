#include "nqsens/nqs.hpp"

#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "nqsens/rng.hpp"

namespace nqsens::nqs {

const char* mode_name(EnsembleMode mode) {
  return mode == EnsembleMode::SingleTrunk ? "st-mh" : "mt-mh";
}

EnsembleMode mode_from_name(const std::string& name) {
  if (name == "st-mh") return EnsembleMode::SingleTrunk;
  if (name == "mt-mh") return EnsembleMode::MultiTrunk;
  throw std::invalid_argument("unknown ensemble mode: " + name);
}

namespace {

void validate_shape(int n_sites, int width, int n_heads) {
  if (n_sites < 1) throw std::invalid_argument("n_sites must be positive");
  if (width < 1) throw std::invalid_argument("width must be positive");
  if (n_heads < 1) throw std::invalid_argument("n_heads must be positive");
}

Matrix random_matrix(Index rows, Index cols, Real stddev, std::mt19937_64& rng) {
  std::normal_distribution<Real> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

Vector random_vector(Index size, Real stddev, std::mt19937_64& rng) {
  std::normal_distribution<Real> normal(0.0, stddev);
  Vector v(size);
  for (Index i = 0; i < size; ++i) v[i] = normal(rng);
  return v;
}

TrunkParams random_trunk(int n_sites, int width, std::mt19937_64& rng) {
  TrunkParams trunk;
  trunk.w1 = random_matrix(width, n_sites, 1.0 / std::sqrt(static_cast<Real>(n_sites)), rng);
  trunk.b1 = Vector::Zero(width);
  trunk.w2 = random_matrix(width, width, 1.0 / std::sqrt(static_cast<Real>(width)), rng);
  trunk.b2 = Vector::Zero(width);
  return trunk;
}

HeadParams random_head(int width, std::mt19937_64& rng) {
  HeadParams head;
  head.alpha = random_vector(width, 0.01, rng);
  head.phi = random_vector(width, 0.01, rng);
  head.beta = 0.0;
  head.gamma = 0.0;
  return head;
}

}  // namespace

Ensemble init_ensemble(EnsembleMode mode, int n_sites, int width, int n_heads,
                       std::uint64_t seed) {
  validate_shape(n_sites, width, n_heads);
  std::mt19937_64 rng = make_engine(seed, 0);
  Ensemble ens;
  ens.mode = mode;
  const int n_trunks = mode == EnsembleMode::SingleTrunk ? 1 : n_heads;
  ens.trunks.reserve(n_trunks);
  for (int t = 0; t < n_trunks; ++t) ens.trunks.push_back(random_trunk(n_sites, width, rng));
  ens.heads.reserve(n_heads);
  for (int k = 0; k < n_heads; ++k) ens.heads.push_back(random_head(width, rng));
  return ens;
}

Vector trunk_forward(const TrunkParams& trunk, const Vector& spins) {
  return trunk.w2 * (trunk.w1 * spins + trunk.b1).cwiseMax(0.0) + trunk.b2;
}

TrunkCache trunk_forward_cached(const TrunkParams& trunk, const Vector& spins) {
  TrunkCache cache;
  cache.spins = spins;
  cache.pre1 = trunk.w1 * spins + trunk.b1;
  cache.act1 = cache.pre1.cwiseMax(0.0);
  cache.features = trunk.w2 * cache.act1 + trunk.b2;
  return cache;
}

Complex head_log_psi(const HeadParams& head, const Vector& features) {
  return {head.alpha.dot(features) + head.beta, head.phi.dot(features) + head.gamma};
}

ComplexVector log_psi(const Ensemble& ens, const Vector& spins) {
  ComplexVector logs(ens.n_heads());
  if (ens.mode == EnsembleMode::SingleTrunk) {
    const Vector features = trunk_forward(ens.trunks[0], spins);
    for (int k = 0; k < ens.n_heads(); ++k) logs[k] = head_log_psi(ens.heads[k], features);
  } else {
    for (int k = 0; k < ens.n_heads(); ++k) {
      logs[k] = head_log_psi(ens.heads[k], trunk_forward(ens.trunks[k], spins));
    }
  }
  return logs;
}

HeadLogDerivatives head_log_derivatives(const HeadParams& head, const Vector& features) {
  HeadLogDerivatives d;
  const Index width = head.alpha.size();
  d.alpha.resize(width);
  d.phi.resize(width);
  for (Index m = 0; m < width; ++m) {
    d.alpha[m] = Complex(features[m], 0.0);
    d.phi[m] = Complex(0.0, features[m]);
  }
  d.beta = Complex(1.0, 0.0);
  d.gamma = Complex(0.0, 1.0);
  return d;
}

TrunkGrads zero_like(const TrunkParams& trunk) {
  return {Matrix::Zero(trunk.w1.rows(), trunk.w1.cols()), Vector::Zero(trunk.b1.size()),
          Matrix::Zero(trunk.w2.rows(), trunk.w2.cols()), Vector::Zero(trunk.b2.size())};
}

void trunk_vjp(const TrunkParams& trunk, const TrunkCache& cache,
               const Vector& cotangent, TrunkGrads& grads) {
  grads.w2.noalias() += cotangent * cache.act1.transpose();
  grads.b2 += cotangent;
  Vector d_pre1 = trunk.w2.transpose() * cotangent;
  for (Index i = 0; i < d_pre1.size(); ++i) {
    if (cache.pre1[i] <= 0.0) d_pre1[i] = 0.0;
  }
  grads.w1.noalias() += d_pre1 * cache.spins.transpose();
  grads.b1 += d_pre1;
}

ParamCount exact_param_count(EnsembleMode mode, int n_sites, int width, int n_heads) {
  validate_shape(n_sites, width, n_heads);
  const std::int64_t n = n_sites, h = width, k = n_heads;
  const std::int64_t trunk_exact = (n * h + h) + (h * h + h);
  const std::int64_t head_exact = 2 * h + 2;
  ParamCount count{};
  if (mode == EnsembleMode::SingleTrunk) {
    count.exact = trunk_exact + k * head_exact;
    count.theory = (n + 1) * h + h * h + 2 * k * h;
  } else {
    count.exact = k * (trunk_exact + head_exact);
    count.theory = k * ((n + 1) * h + h * h + 2 * h);
  }
  return count;
}

Index flat_size(const Ensemble& ens) {
  Index size = 0;
  for (const auto& t : ens.trunks) {
    size += t.w1.size() + t.b1.size() + t.w2.size() + t.b2.size();
  }
  for (const auto& h : ens.heads) size += h.alpha.size() + h.phi.size() + 2;
  return size;
}

Vector flatten(const Ensemble& ens) {
  Vector flat(flat_size(ens));
  Index pos = 0;
  auto put_matrix = [&](const Matrix& m) {
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) flat[pos++] = m(r, c);
    }
  };
  auto put_vector = [&](const Vector& v) {
    flat.segment(pos, v.size()) = v;
    pos += v.size();
  };
  for (const auto& t : ens.trunks) {
    put_matrix(t.w1);
    put_vector(t.b1);
    put_matrix(t.w2);
    put_vector(t.b2);
  }
  for (const auto& h : ens.heads) {
    put_vector(h.alpha);
    put_vector(h.phi);
    flat[pos++] = h.beta;
    flat[pos++] = h.gamma;
  }
  return flat;
}

void unflatten(const Vector& flat, Ensemble& ens) {
  if (flat.size() != flat_size(ens)) {
    throw std::invalid_argument("flat parameter vector has wrong length");
  }
  Index pos = 0;
  auto take_matrix = [&](Matrix& m) {
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = flat[pos++];
    }
  };
  auto take_vector = [&](Vector& v) {
    v = flat.segment(pos, v.size());
    pos += v.size();
  };
  for (auto& t : ens.trunks) {
    take_matrix(t.w1);
    take_vector(t.b1);
    take_matrix(t.w2);
    take_vector(t.b2);
  }
  for (auto& h : ens.heads) {
    take_vector(h.alpha);
    take_vector(h.phi);
    h.beta = flat[pos++];
    h.gamma = flat[pos++];
  }
}

void save_checkpoint(const Ensemble& ens, const std::filesystem::path& path) {
  nlohmann::json j;
  j["mode"] = mode_name(ens.mode);
  j["n_sites"] = ens.input_dim();
  j["width"] = ens.width();
  j["n_heads"] = ens.n_heads();
  const Vector flat = flatten(ens);
  j["params"] = std::vector<Real>(flat.data(), flat.data() + flat.size());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out << j.dump(2) << '\n';
}

Ensemble load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed checkpoint JSON: " + std::string(e.what()));
  }
  for (const char* key : {"mode", "n_sites", "width", "n_heads", "params"}) {
    if (!j.contains(key)) throw std::runtime_error(std::string("checkpoint missing key: ") + key);
  }
  const EnsembleMode mode = mode_from_name(j.at("mode").get<std::string>());
  const int n_sites = j.at("n_sites").get<int>();
  const int width = j.at("width").get<int>();
  const int n_heads = j.at("n_heads").get<int>();
  Ensemble ens = init_ensemble(mode, n_sites, width, n_heads, 0);
  const auto params = j.at("params").get<std::vector<Real>>();
  if (static_cast<Index>(params.size()) != flat_size(ens)) {
    throw std::runtime_error("checkpoint parameter count does not match its shape metadata");
  }
  Vector flat(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) flat[static_cast<Index>(i)] = params[i];
  unflatten(flat, ens);
  return ens;
}

}  // namespace nqsens::nqs
