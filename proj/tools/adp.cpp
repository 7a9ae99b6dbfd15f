// adp: command-line front end for the LQR solvers and experiment sweeps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "adp/baselines.hpp"
#include "adp/bench.hpp"
#include "adp/errors.hpp"
#include "adp/experiments.hpp"
#include "adp/rlsvi.hpp"

namespace {

using json = nlohmann::ordered_json;

json to_json(const adp::Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json evaluation_json(const adp::Evaluation& ev) {
  json j;
  j["stabilizing"] = ev.stabilizing;
  j["rel_error"] = ev.rel_error ? json(*ev.rel_error) : json(nullptr);
  j["cost"] = ev.cost ? json(*ev.cost) : json(nullptr);
  return j;
}

int cmd_solve(const std::string& problem_name, std::size_t T, double d,
              double behavior_gain, std::size_t I_max, std::uint64_t seed,
              bool learn) {
  adp::ExperimentConfig cfg;
  cfg.problem = problem_name;
  const adp::Problem pb = adp::make_problem(cfg);
  const adp::DareSolution opt = adp::solve_dare(pb.sys, pb.cost);
  json out;
  out["problem"] = problem_name;
  out["spectral_radius_A"] = adp::spectral_radius(pb.sys.A);
  out["P_star"] = to_json(opt.P.matrix());
  out["K_star"] = to_json(opt.K);
  out["J_star"] = opt.J;
  out["closed_loop_radius"] = adp::spectral_radius(pb.sys.A - pb.sys.B * opt.K);
  if (learn) {
    adp::RlsviConfig rc;
    rc.P0 = adp::SymMatrix::zero(pb.sys.n());
    rc.I_max = I_max;
    rc.T = T;
    rc.d = d;
    rc.K_c = behavior_gain * adp::Matrix::Identity(pb.sys.m(), pb.sys.n());
    rc.Sigma_eta = adp::SymMatrix::identity(pb.sys.m());
    rc.seed = seed;
    const adp::RlsviResult res = adp::run_rlsvi(
        adp::make_sampler(pb.sys, adp::CostSpec::quadratic(pb.cost)), rc);
    json r;
    r["K_hat"] = to_json(res.K_hat);
    r["iterations"] = res.diagnostics.size();
    r["excitation_eig_min"] = res.excitation_eig_min;
    r["pinv_fallbacks"] = res.pinv_fallbacks;
    r["status"] = res.status == adp::RlsviStatus::ok ? "ok" : "diverged";
    r["evaluation"] = evaluation_json(adp::evaluate_gain(pb.sys, pb.cost, res.K_hat, opt));
    out["rlsvi"] = r;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

void print_summary(const std::vector<adp::TrialRecord>& records,
                   adp::SummaryMetric metric) {
  adp::write_summary_csv(adp::summarize(records, metric), std::cout);
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              std::size_t threads, bool kappa) {
  const adp::ExperimentConfig defaults =
      kappa ? adp::ExperimentConfig::adaptivity_defaults()
            : adp::ExperimentConfig::convergence_defaults();
  const adp::ExperimentConfig cfg =
      config_path.empty() ? defaults : adp::load_experiment_config(config_path, defaults);
  const auto records = kappa ? adp::run_adaptivity_sweep(cfg, threads)
                             : adp::run_convergence_sweep(cfg, threads);
  const auto metric =
      kappa ? adp::SummaryMetric::final_cost : adp::SummaryMetric::rel_error;
  adp::emit_report(records, out_dir, metric, cfg.record_timing);
  print_summary(records, metric);
  std::cerr << "wrote " << out_dir << "/trials.csv and " << out_dir
            << "/summary.csv (" << records.size() << " records)\n";
  return 0;
}

int cmd_portfolio(const std::string& returns_path, bool synthetic,
                  std::uint64_t seed, std::size_t periods,
                  const adp::PortfolioRunConfig& rc, const std::string& out_dir) {
  adp::ReturnsTable table;
  if (synthetic) {
    table = adp::synthetic_returns(seed, periods, adp::default_generator(3));
  } else {
    std::ifstream in(returns_path);
    if (!in) throw adp::InputError("cannot open " + returns_path);
    table = adp::read_returns_csv(in);
  }
  const adp::PortfolioReport rep = adp::run_portfolio_pipeline(table, rc);
  json out;
  out["periods"] = table.returns.rows();
  out["assets"] = table.assets;
  out["Phi"] = to_json(rep.params.Phi);
  out["Pi"] = to_json(rep.params.Pi);
  out["Sigma"] = to_json(rep.params.Sigma.matrix());
  out["Omega"] = to_json(rep.params.Omega.matrix());
  out["S_eig_min"] = adp::eig_min(rep.problem.cost.S);
  out["J_star"] = rep.optimum.J;
  out["K_star"] = to_json(rep.optimum.K);
  out["K_hat"] = to_json(rep.result.K_hat);
  out["evaluation"] = evaluation_json(rep.evaluation);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(std::filesystem::path(out_dir) / "portfolio.json");
    if (!f) throw adp::IoError("cannot write " + out_dir + "/portfolio.json");
    f << out.dump(2) << '\n';
    std::ofstream diag(std::filesystem::path(out_dir) / "rlsvi_diagnostics.csv");
    adp::write_rlsvi_diagnostics(rep.result, diag);
  }
  std::cout << out.dump(2) << '\n';
  return rep.evaluation.stabilizing ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven value iteration for stochastic LQR"};
  app.require_subcommand(1);

  std::string problem = "datacenter";
  std::size_t T = 100000;
  double d = 1000.0;
  double behavior_gain = -0.05;
  std::size_t I_max = 100;
  std::uint64_t seed = 1;
  bool learn = false;
  auto* solve = app.add_subcommand("solve", "Solve the Riccati equation of a benchmark");
  solve->add_option("--problem", problem, "datacenter | portfolio")
      ->check(CLI::IsMember({"datacenter", "portfolio"}));
  solve->add_flag("--learn", learn, "Also run R-LSVI from simulated data");
  solve->add_option("--T", T, "Sample size for --learn");
  solve->add_option("--d", d, "Reset bound for --learn");
  solve->add_option("--behavior-gain", behavior_gain, "K_c = value * I for --learn");
  solve->add_option("--iterations", I_max, "R-LSVI iterations for --learn");
  solve->add_option("--seed", seed, "Sampling seed for --learn");

  std::string config_path;
  std::string out_dir = "results";
  std::size_t threads = 0;
  auto* conv = app.add_subcommand("sweep-convergence", "Sample-size sweep (quadratic cost)");
  auto* kap = app.add_subcommand("sweep-kappa", "Cost-exponent sweep (power cost)");
  for (auto* sub : {conv, kap}) {
    sub->add_option("--config", config_path, "Experiment JSON")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--threads", threads, "Worker count (default: ADP_THREADS or all cores)");
  }

  std::string returns_path;
  bool synthetic = false;
  std::size_t periods = 5000;
  adp::PortfolioRunConfig prc;
  std::string pf_out;
  auto* pf = app.add_subcommand("portfolio", "Portfolio pipeline from a returns table");
  auto* ret_opt = pf->add_option("--returns", returns_path, "CSV with header date,<assets...>")
                      ->check(CLI::ExistingFile);
  auto* syn_opt = pf->add_flag("--synthetic", synthetic, "Use generated returns");
  ret_opt->excludes(syn_opt);
  pf->add_option("--seed", seed, "Seed for --synthetic and sampling");
  pf->add_option("--periods", periods, "Periods of synthetic returns");
  pf->add_option("--T", prc.T, "R-LSVI sample size");
  pf->add_option("--d", prc.d, "Reset bound");
  pf->add_option("--iterations", prc.I_max, "R-LSVI iterations");
  pf->add_option("--out", pf_out, "Write portfolio.json and diagnostics here");

  auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(problem, T, d, behavior_gain, I_max, seed, learn);
    if (conv->parsed()) return cmd_sweep(config_path, out_dir, threads, false);
    if (kap->parsed()) return cmd_sweep(config_path, out_dir, threads, true);
    if (pf->parsed()) {
      if (!synthetic && returns_path.empty()) {
        std::cerr << "portfolio: pass --returns FILE or --synthetic\n";
        return 2;
      }
      prc.seed = seed;
      return cmd_portfolio(returns_path, synthetic, seed, periods, prc, pf_out);
    }
    if (selftest->parsed()) return adp::run_selftest(std::cout) == 0 ? 0 : 1;
  } catch (const adp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
