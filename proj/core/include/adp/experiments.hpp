// Multi-seed experiment runner: sample-size sweeps, cost-exponent sweeps
// and CSV reports.
//
// A trial cell is (T, κ, trial). Its seed is derived from the base seed and
// those three coordinates only, and every method in the cell sees the same
// trajectory batch, so neither the method list nor the worker count can
// change an individual outcome.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adp/bench.hpp"
#include "adp/rlsvi.hpp"
#include "adp/sim.hpp"

namespace adp {

enum class Method {
  rlsvi,
  rlsvi_norescale,
  nominal_vi,
  nominal_pi,
  lspi,
  olspi,
  polgrad,
};

std::string_view method_name(Method m);
/// Throws ConfigError on an unknown name.
Method parse_method(std::string_view name);
std::vector<Method> all_methods();

/// Scalar multiplier α of the behavior gain K_c = α·I, drawn per trial from
/// U(low, high); low == high means a constant.
struct GainDraw {
  double low = 0.0;
  double high = 0.0;
};

struct ExperimentConfig {
  std::string problem = "datacenter";  // datacenter | portfolio
  std::vector<Method> methods = all_methods();
  std::vector<std::size_t> T_grid = {1000, 3000, 10000, 30000, 100000};
  std::vector<double> kappa_grid = {2.0};
  std::size_t trials = 20;
  std::size_t I_max = 100;
  std::uint64_t base_seed = 1;
  double d = 1000.0;
  GainDraw behavior_gain = {-0.1, 0.0};
  double sigma_eta = 1.0;
  /// P̂₀ = βI with β ~ U(beta_low, beta_high).
  double beta_low = 0.0;
  double beta_high = 1.0;
  /// Policy-gradient start K₀ = α₀·I with α₀ ~ U(low, high).
  GainDraw pg_init = {0.1, 1.0};
  double pg_learning_rate = 1e-2;
  std::size_t pg_steps = 100;
  std::size_t olspi_inner = 20;
  std::size_t olspi_outer = 5;
  /// Closed-loop horizon for empirical costs in the κ sweep.
  std::size_t eval_horizon = 100000;
  /// Seed of the synthetic returns behind the portfolio problem.
  std::uint64_t portfolio_seed = 0;
  /// When false the wall_time_ms column is left empty, which keeps reports
  /// byte-identical across runs.
  bool record_timing = false;

  /// Throws ConfigError when a field is out of range.
  void validate() const;

  static ExperimentConfig convergence_defaults();
  static ExperimentConfig adaptivity_defaults();
};

/// Parses JSON with ExperimentConfig field names on top of `defaults`.
/// Unknown keys and wrongly typed values raise ConfigError.
ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const ExperimentConfig& defaults);
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const ExperimentConfig& defaults);

struct TrialRecord {
  Method method = Method::rlsvi;
  std::size_t T = 0;
  double kappa = 2.0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool stabilizing = false;
  std::optional<double> rel_error;
  std::optional<double> final_cost;
  double wall_time_ms = 0.0;
  std::string failure;
  // Per-trial draws.
  double beta = 0.0;
  double alpha = 0.0;
  double alpha0 = 0.0;
  /// Learned gain (empty on failure); not written to CSV.
  std::optional<GainMatrix> gain;
};

/// Builds the benchmark named in the config.
Problem make_problem(const ExperimentConfig& cfg);

/// Runs every configured method on one trial cell. `cost` is the stage cost
/// used for data generation and evaluation. With a quadratic cost the record
/// carries the relative error against the DARE optimum; with a power cost
/// (κ ≠ 2) it carries an empirical closed-loop cost only.
std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg,
                                   const Problem& problem,
                                   const DareSolution& optimum,
                                   const CostSpec& cost, std::size_t T,
                                   std::size_t trial);

/// Worker count: `requested` if nonzero, else ADP_THREADS, else hardware
/// concurrency.
std::size_t resolve_threads(std::size_t requested = 0);

/// Quadratic cost, one cell per (T, trial).
std::vector<TrialRecord> run_convergence_sweep(const ExperimentConfig& cfg,
                                               std::size_t threads = 0);
/// Power cost, one cell per (κ, T, trial); every κ must lie in [1, 3].
std::vector<TrialRecord> run_adaptivity_sweep(const ExperimentConfig& cfg,
                                              std::size_t threads = 0);

enum class SummaryMetric { rel_error, final_cost };

struct SummaryRow {
  Method method = Method::rlsvi;
  std::size_t T = 0;
  double kappa = 0.0;
  std::optional<double> median;
  std::optional<double> q25;
  std::optional<double> q75;
  double stability_fraction = 0.0;
  std::size_t n_trials = 0;
};

/// Linear-interpolation quantile of unsorted data, q in [0, 1].
double quantile(std::vector<double> values, double q);

/// One row per (method, T, κ) in first-appearance order. Quantiles are over
/// stabilizing records only.
std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records,
                                  SummaryMetric metric);

void write_trials_csv(const std::vector<TrialRecord>& records, bool with_timing,
                      std::ostream& os);
void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os);

/// Writes trials.csv and summary.csv into `dir` (created if missing).
/// Throws IoError when the files cannot be written.
void emit_report(const std::vector<TrialRecord>& records,
                 const std::filesystem::path& dir, SummaryMetric metric,
                 bool with_timing = false);

struct PortfolioRunConfig {
  std::size_t T = 10000;
  double d = 10.0;
  std::size_t I_max = 100;
  std::uint64_t seed = 0;
  bool rescaled = true;
  double shrink = 0.5;
};

struct PortfolioReport {
  PortfolioParams params;
  Problem problem;
  DareSolution optimum;
  RlsviResult result;
  Evaluation evaluation;
};

/// returns → alphas → factor fit → portfolio LQR → R-LSVI from P̂₀ = 0 with
/// K_c = 0 and Σ_η = I.
PortfolioReport run_portfolio_pipeline(const ReturnsTable& returns,
                                       const PortfolioRunConfig& cfg);

/// Quick invariant checks used by `adp selftest`; prints one line per check
/// and returns the number of failures.
int run_selftest(std::ostream& os);

}  // namespace adp
