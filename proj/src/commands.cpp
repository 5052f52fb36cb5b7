#include "nqsens/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "nqsens/costmodel.hpp"
#include "nqsens/diagnostics.hpp"
#include "nqsens/model.hpp"
#include "nqsens/nqs.hpp"
#include "nqsens/trainer.hpp"

namespace nqsens::commands {

using nlohmann::json;

namespace {

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<Real> to_std(const Vector& v) { return {v.begin(), v.end()}; }

// Non-finite values (kappa of a rank-deficient frame) have no JSON number.
json finite_or_null(Real x) { return std::isfinite(x) ? json(x) : json(); }

json make_report(const ComplexMatrix& states, const Matrix& hamiltonian,
                 const model::EdResult& ed) {
  const int n_heads = static_cast<int>(states.cols());
  Vector energies(n_heads), variances(n_heads);
  for (int k = 0; k < n_heads; ++k) {
    const auto moments = diagnostics::energy_and_variance(states.col(k), hamiltonian);
    energies(k) = moments.energy;
    variances(k) = moments.variance;
  }
  const auto metrics = diagnostics::projection_metrics(states, ed.ground_block);
  const Real frob_dev = trainer::frob_deviation(diagnostics::exact_overlap_matrix(states));
  return json{{"E0", ed.ground_energy},
              {"energies", to_std(energies)},
              {"variances", to_std(variances)},
              {"Ebar", energies.mean()},
              {"maxVar", variances.maxCoeff()},
              {"fidelities", to_std(metrics.fidelities)},
              {"F_mean", metrics.f_mean},
              {"F_min", metrics.f_min},
              {"rank", metrics.rank},
              {"d_eff", metrics.d_eff},
              {"sigma_min", metrics.sigma_min},
              {"kappa", finite_or_null(metrics.kappa)},
              {"frob_dev", frob_dev}};
}

void log_energies(std::ostream& log, const json& report) {
  log << "E = [";
  const auto& energies = report.at("energies");
  for (std::size_t k = 0; k < energies.size(); ++k)
    log << (k ? ", " : "") << energies[k].get<Real>();
  log << "]";
}

}  // namespace

int run_ed(const config::RunConfig& cfg, const std::filesystem::path& out_dir,
           std::ostream& log) {
  const auto basis = model::build_sector_basis(cfg.ring.n_sites);
  const Matrix h = model::dense_hamiltonian(cfg.ring, basis);
  const auto ed = model::exact_diagonalize(h);

  json block = json::array();
  for (Index i = 0; i < ed.ground_block.rows(); ++i) {
    json row = json::array();
    for (Index c = 0; c < ed.ground_block.cols(); ++c) row.push_back(ed.ground_block(i, c));
    block.push_back(std::move(row));
  }
  const json j{{"n_sites", cfg.ring.n_sites},
               {"j1", cfg.ring.j1},
               {"j2", cfg.ring.j2},
               {"sector_dim", basis.size()},
               {"eigenvalues", to_std(ed.eigenvalues)},
               {"ground_energy", ed.ground_energy},
               {"degeneracy", ed.degeneracy},
               {"ground_block", std::move(block)}};

  std::filesystem::create_directories(out_dir);
  const auto path = out_dir / "ed.json";
  write_json(j, path);
  log << "n_sites " << cfg.ring.n_sites << ": sector dim " << basis.size() << ", E0 = "
      << ed.ground_energy << ", degeneracy " << ed.degeneracy << "\n"
      << "wrote " << path.string() << "\n";
  return 0;
}

int run_train(const config::RunConfig& cfg, const std::filesystem::path& out_dir,
              std::ostream& log) {
  std::filesystem::create_directories(out_dir);
  config::save_config(cfg, out_dir / "config.json");

  const auto basis = model::build_sector_basis(cfg.ring.n_sites);
  const Matrix h = model::dense_hamiltonian(cfg.ring, basis);
  const auto ed = model::exact_diagonalize(h);

  json summary{{"E0", ed.ground_energy}, {"seeds", cfg.seeds}};
  for (const char* key : {"E_bar", "max_var", "f_mean", "f_min", "frob_dev", "rank", "d_eff"})
    summary[key] = json::array();

  for (const std::uint64_t seed : cfg.seeds) {
    const auto tag = std::to_string(seed);
    const nqs::Ensemble init =
        nqs::init_ensemble(cfg.mode, cfg.ring.n_sites, cfg.width, cfg.n_heads, seed);
    trainer::TrainOptions opts;
    opts.train = cfg.train;
    opts.sampler = cfg.sampler;
    opts.seed = seed;
    const auto result = trainer::train(init, cfg.ring, opts);

    trainer::write_trace_csv(result.trace, out_dir / ("trace_" + tag + ".csv"));
    nqs::save_checkpoint(result.ensemble, out_dir / ("checkpoint_" + tag + ".json"));

    const ComplexMatrix states = diagnostics::head_state_matrix(result.ensemble, basis);
    json report = make_report(states, h, ed);
    Real seconds = 0.0;
    for (const auto& row : result.trace) seconds += row.seconds;
    report["seed"] = seed;
    report["seconds"] = seconds;
    write_json(report, out_dir / ("report_" + tag + ".json"));

    summary["E_bar"].push_back(report.at("Ebar"));
    summary["max_var"].push_back(report.at("maxVar"));
    summary["f_mean"].push_back(report.at("F_mean"));
    summary["f_min"].push_back(report.at("F_min"));
    summary["frob_dev"].push_back(report.at("frob_dev"));
    summary["rank"].push_back(report.at("rank"));
    summary["d_eff"].push_back(report.at("d_eff"));

    log << "seed " << tag << ": ";
    log_energies(log, report);
    log << ", F_min = " << report.at("F_min").get<Real>() << ", rank "
        << report.at("rank").get<int>() << ", frob_dev = "
        << report.at("frob_dev").get<Real>() << std::setprecision(3) << ", " << seconds
        << " s\n"
        << std::setprecision(6);
  }

  auto range = [&](const char* key) {
    Real lo = summary[key][0].get<Real>(), hi = lo;
    for (const auto& v : summary[key]) {
      lo = std::min(lo, v.get<Real>());
      hi = std::max(hi, v.get<Real>());
    }
    return std::pair{lo, hi};
  };
  Real e_sum = 0.0;
  for (const auto& v : summary["E_bar"]) e_sum += v.get<Real>();
  summary["E_bar_mean"] = e_sum / static_cast<Real>(cfg.seeds.size());
  summary["max_var_max"] = range("max_var").second;
  summary["f_min_min"] = range("f_min").first;
  summary["f_min_max"] = range("f_min").second;
  summary["frob_dev_max"] = range("frob_dev").second;
  write_json(summary, out_dir / "summary.json");

  log << "E_bar mean " << summary["E_bar_mean"].get<Real>() << " (exact "
      << ed.ground_energy << "), F_min best " << summary["f_min_max"].get<Real>() << "\n"
      << "wrote " << out_dir.string() << "\n";
  return 0;
}

int run_diagnose(const config::RunConfig& cfg, const std::filesystem::path& checkpoint,
                 std::ostream& out) {
  const nqs::Ensemble ens = nqs::load_checkpoint(checkpoint);
  const model::RingSpec ring{ens.input_dim(), cfg.ring.j1, cfg.ring.j2};
  model::validate(ring);

  const auto basis = model::build_sector_basis(ring.n_sites);
  const Matrix h = model::dense_hamiltonian(ring, basis);
  const auto ed = model::exact_diagonalize(h);
  const ComplexMatrix states = diagnostics::head_state_matrix(ens, basis);
  json report = make_report(states, h, ed);
  report["checkpoint"] = checkpoint.string();
  out << report.dump(2) << "\n";
  return 0;
}

int run_bench(const config::RunConfig& cfg, const std::filesystem::path& out_dir,
              std::ostream& log) {
  std::filesystem::create_directories(out_dir);
  const auto path = out_dir / "bench.csv";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());

  const int n = cfg.ring.n_sites;
  const int width = cfg.width;
  out << std::setprecision(12)
      << "n_heads,params_single,params_multi,params_single_exact,params_multi_exact,"
         "update_ratio,matched_width,cost_single,cost_multi,cost_penalty\n";
  for (int k = 1; k <= 6; ++k) {
    const costmodel::CostInputs in{n, width, k, cfg.sampler.n_samples, 1.0};
    out << k << ',' << costmodel::updated_params_single(n, width, k) << ','
        << costmodel::updated_params_multi(n, width, k) << ','
        << nqs::exact_param_count(nqs::EnsembleMode::SingleTrunk, n, width, k).exact << ','
        << nqs::exact_param_count(nqs::EnsembleMode::MultiTrunk, n, width, k).exact << ','
        << costmodel::update_ratio(n, width, k) << ','
        << costmodel::matched_width(n, width, k) << ','
        << costmodel::cost_single(in) << ',' << costmodel::cost_multi(in) << ','
        << costmodel::cost_penalty(in) << '\n';
  }
  log << "wrote " << path.string() << "\n";
  return 0;
}

int run_rank(const config::RunConfig& cfg, const std::string& family, std::ostream& out) {
  ComplexMatrix states;
  int n_sites = cfg.ring.n_sites;

  if (family == "mg-momentum" || family == "mg-dimer" || family == "ed-ground") {
    const auto basis = model::build_sector_basis(n_sites);
    if (family == "mg-momentum") {
      const auto pair = model::build_momentum_states(basis);
      states.resize(basis.size(), 2);
      states.col(0) = pair.psi_plus;
      states.col(1) = pair.psi_minus;
    } else if (family == "mg-dimer") {
      const auto pair = model::build_dimer_states(basis);
      states.resize(basis.size(), 2);
      states.col(0) = pair.phi_a;
      states.col(1) = pair.phi_b;
    } else {
      const Matrix h = model::dense_hamiltonian(cfg.ring, basis);
      states = model::exact_diagonalize(h).ground_block.cast<Complex>();
    }
  } else if (std::filesystem::exists(family)) {
    const nqs::Ensemble ens = nqs::load_checkpoint(family);
    n_sites = ens.input_dim();
    states = diagnostics::head_state_matrix(ens, model::build_sector_basis(n_sites));
  } else {
    throw std::invalid_argument("unknown state family \"" + family +
                                "\" (mg-momentum, mg-dimer, ed-ground, or a checkpoint path)");
  }

  const auto report = diagnostics::rank_analysis(states);
  const json j{{"family", family},
               {"n_sites", n_sites},
               {"n_states", states.cols()},
               {"support_size", report.support_size},
               {"r_g", report.r_g},
               {"r_omega", report.r_omega},
               {"r_both", report.r_both},
               {"h_star", report.h_star}};
  out << j.dump(2) << "\n";
  return 0;
}

int run_cost(const config::RunConfig& cfg, std::ostream& out) {
  const int n = cfg.ring.n_sites;
  const int width = cfg.width;
  const int k = cfg.n_heads;
  const costmodel::CostInputs in{n, width, k, cfg.sampler.n_samples, 1.0};
  const json j{
      {"n_sites", n},
      {"width", width},
      {"n_heads", k},
      {"n_samples", cfg.sampler.n_samples},
      {"trunk_flops", costmodel::trunk_flops(n, width)},
      {"params_single", costmodel::updated_params_single(n, width, k)},
      {"params_multi", costmodel::updated_params_multi(n, width, k)},
      {"params_single_exact",
       nqs::exact_param_count(nqs::EnsembleMode::SingleTrunk, n, width, k).exact},
      {"params_multi_exact",
       nqs::exact_param_count(nqs::EnsembleMode::MultiTrunk, n, width, k).exact},
      {"update_ratio", costmodel::update_ratio(n, width, k)},
      {"matched_width", costmodel::matched_width(n, width, k)},
      {"cost_single", costmodel::cost_single(in)},
      {"cost_multi", costmodel::cost_multi(in)},
      {"cost_penalty", costmodel::cost_penalty(in)},
      {"trunk_dominated", costmodel::trunk_dominated(n, width, k)}};
  out << j.dump(2) << "\n";
  return 0;
}

}  // namespace nqsens::commands
