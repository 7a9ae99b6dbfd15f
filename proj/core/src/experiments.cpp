#include "adp/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "adp/baselines.hpp"
#include "adp/errors.hpp"
#include "adp/rng.hpp"
#include "json.hpp"

namespace adp {

namespace {

using json = nlohmann::json;

constexpr std::pair<Method, std::string_view> kMethodNames[] = {
    {Method::rlsvi, "rlsvi"},
    {Method::rlsvi_norescale, "rlsvi_norescale"},
    {Method::nominal_vi, "nominal_vi"},
    {Method::nominal_pi, "nominal_pi"},
    {Method::lspi, "lspi"},
    {Method::olspi, "olspi"},
    {Method::polgrad, "polgrad"},
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

double uniform_draw(Engine& eng, const GainDraw& g) {
  std::uniform_real_distribution<double> dist(g.low, g.high);
  const double v = dist(eng);
  return g.low == g.high ? g.low : v;
}

bool quadratic_equivalent(const CostSpec& c) {
  return c.kind == CostKind::quadratic || c.kappa == 2.0;
}

// ---- JSON helpers ---------------------------------------------------------

[[noreturn]] void bad_type(const std::string& key, const char* expected) {
  throw ConfigError("config: '" + key + "' must be " + expected);
}

double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) bad_type(key, "a number");
  return v.get<double>();
}

std::uint64_t get_unsigned(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) {
      return static_cast<std::uint64_t>(d);
    }
  }
  bad_type(key, "a nonnegative integer");
}

GainDraw get_draw(const json& v, const std::string& key) {
  if (v.is_number()) {
    const double x = v.get<double>();
    return {x, x};
  }
  if (v.is_array() && v.size() == 2) {
    return {get_number(v[0], key), get_number(v[1], key)};
  }
  if (v.is_object()) {
    GainDraw g;
    bool lo = false;
    bool hi = false;
    for (const auto& [k, x] : v.items()) {
      if (k == "low") {
        g.low = get_number(x, key + ".low");
        lo = true;
      } else if (k == "high") {
        g.high = get_number(x, key + ".high");
        hi = true;
      } else {
        throw ConfigError("config: unknown key '" + key + "." + k + "'");
      }
    }
    if (!lo || !hi) throw ConfigError("config: '" + key + "' needs low and high");
    return g;
  }
  bad_type(key, "a number, [low, high] or {\"low\", \"high\"}");
}

// ---- method dispatch ------------------------------------------------------

struct TrialContext {
  TrialContext(const ExperimentConfig& c, const Problem& p, const CostSpec& cs,
               std::size_t t, std::uint64_t s, SymMatrix p0)
      : cfg(c), problem(p), cost(cs), T(t), seed(s), P0(std::move(p0)) {}

  const ExperimentConfig& cfg;
  const Problem& problem;
  const CostSpec& cost;
  std::size_t T;
  std::uint64_t seed;
  SymMatrix P0;
  double alpha = 0.0;
  double alpha0 = 0.0;

  std::optional<TrajectoryBatch> batch;
  std::optional<DataMatrices> dm_rescaled;
  std::optional<DataMatrices> dm_raw;
  std::optional<SysIdEstimate> sysid;

  const TrajectoryBatch& get_batch() {
    if (!batch) {
      const Eigen::Index n = problem.sys.n();
      const Eigen::Index m = problem.sys.m();
      const BehaviorPolicy behavior{alpha * Matrix::Identity(m, n),
                                    SymMatrix::scaled_identity(m, cfg.sigma_eta)};
      batch = simulate(problem.sys, behavior, cost,
                       ResetConfig{cfg.d, derive_seed(seed, {hash_tag("batch")})},
                       T);
    }
    return *batch;
  }
  const DataMatrices& get_dm(bool rescaled) {
    auto& slot = rescaled ? dm_rescaled : dm_raw;
    if (!slot) slot = build_data_matrices(get_batch(), rescaled);
    return *slot;
  }
  const SysIdEstimate& get_sysid() {
    if (!sysid) sysid = sysid_least_squares(get_batch());
    return *sysid;
  }
};

GainMatrix unwrap(const SolverOutcome& o) {
  if (!o.ok()) throw Error(o.failure);
  return *o.gain;
}

GainMatrix solve_method(Method method, TrialContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  switch (method) {
    case Method::rlsvi:
    case Method::rlsvi_norescale: {
      const bool rescaled = method == Method::rlsvi;
      return rlsvi_iterate(ctx.get_dm(rescaled), ctx.P0, cfg.I_max).K_hat;
    }
    case Method::nominal_vi:
      return unwrap(nominal_vi(ctx.get_sysid()));
    case Method::nominal_pi: {
      const SysIdEstimate& est = ctx.get_sysid();
      const GainMatrix K0 = induced_gain(est.model(), est.cost(), ctx.P0);
      return unwrap(nominal_pi(est, K0, cfg.I_max));
    }
    case Method::lspi:
    case Method::olspi: {
      const DataMatrices& dm = ctx.get_dm(true);
      const GainMatrix K0 = greedy_gain(estimate_hamiltonian(dm, ctx.P0).Q);
      if (method == Method::lspi) return unwrap(lspi(dm, K0, cfg.I_max));
      return unwrap(olspi(dm, K0, ctx.P0, cfg.olspi_inner, cfg.olspi_outer));
    }
    case Method::polgrad: {
      const LinearSystem& sys = ctx.problem.sys;
      PolicyGradientOptions opts;
      opts.steps = cfg.pg_steps;
      opts.learning_rate = cfg.pg_learning_rate;
      opts.mc_seed = derive_seed(ctx.seed, {hash_tag("polgrad")});
      const GainMatrix K0 = ctx.alpha0 * Matrix::Identity(sys.m(), sys.n());
      return unwrap(policy_gradient(sys, ctx.cost, K0, opts));
    }
  }
  throw Error("unknown method");
}

// ---- parallel map over cells ------------------------------------------------

template <typename Cell>
std::vector<TrialRecord> run_cells(
    const std::vector<Cell>& cells, std::size_t threads,
    const std::function<std::vector<TrialRecord>(const Cell&)>& work) {
  std::vector<std::vector<TrialRecord>> out(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        out[i] = work(cells[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t nw = std::max<std::size_t>(
      1, std::min(resolve_threads(threads), cells.size()));
  if (nw == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (std::size_t k = 0; k < nw; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<TrialRecord> flat;
  for (auto& v : out) {
    for (auto& r : v) flat.push_back(std::move(r));
  }
  return flat;
}

}  // namespace

std::string_view method_name(Method m) {
  for (const auto& [k, name] : kMethodNames) {
    if (k == m) return name;
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (const auto& [k, n] : kMethodNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::vector<Method> all_methods() {
  std::vector<Method> out;
  for (const auto& [k, name] : kMethodNames) out.push_back(k);
  return out;
}

void ExperimentConfig::validate() const {
  if (problem != "datacenter" && problem != "portfolio") {
    throw ConfigError("config: problem must be 'datacenter' or 'portfolio'");
  }
  if (methods.empty()) throw ConfigError("config: methods is empty");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = i + 1; j < methods.size(); ++j) {
      if (methods[i] == methods[j]) {
        throw ConfigError("config: method '" +
                          std::string(method_name(methods[i])) + "' listed twice");
      }
    }
  }
  if (T_grid.empty()) throw ConfigError("config: T_grid is empty");
  for (auto T : T_grid) {
    if (T < 1) throw ConfigError("config: T_grid entries must be positive");
  }
  if (kappa_grid.empty()) throw ConfigError("config: kappa_grid is empty");
  if (trials < 1) throw ConfigError("config: trials must be at least 1");
  if (I_max < 1) throw ConfigError("config: I_max must be at least 1");
  if (!(d > 0.0)) throw ConfigError("config: d must be positive");
  if (!(sigma_eta > 0.0)) throw ConfigError("config: sigma_eta must be positive");
  if (!(behavior_gain.low <= behavior_gain.high)) {
    throw ConfigError("config: behavior_gain low exceeds high");
  }
  if (!(beta_low >= 0.0 && beta_low <= beta_high)) {
    throw ConfigError("config: need 0 <= beta_low <= beta_high");
  }
  if (!(pg_init.low <= pg_init.high)) throw ConfigError("config: pg_init low exceeds high");
  if (!(pg_learning_rate > 0.0)) throw ConfigError("config: pg_learning_rate must be positive");
  if (eval_horizon < 1) throw ConfigError("config: eval_horizon must be positive");
}

ExperimentConfig ExperimentConfig::convergence_defaults() { return {}; }

ExperimentConfig ExperimentConfig::adaptivity_defaults() {
  ExperimentConfig c;
  c.methods = {Method::rlsvi, Method::nominal_vi, Method::nominal_pi,
               Method::lspi, Method::olspi, Method::polgrad};
  c.T_grid = {100000};
  c.kappa_grid = {1.0, 1.5, 2.0, 2.5, 3.0};
  c.behavior_gain = {0.1, 0.2};
  return c;
}

ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const ExperimentConfig& defaults) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig c = defaults;
  for (const auto& [key, v] : doc.items()) {
    if (key == "problem") {
      if (!v.is_string()) bad_type(key, "a string");
      c.problem = v.get<std::string>();
    } else if (key == "methods") {
      if (!v.is_array()) bad_type(key, "an array of method names");
      c.methods.clear();
      for (const auto& m : v) {
        if (!m.is_string()) bad_type(key, "an array of method names");
        c.methods.push_back(parse_method(m.get<std::string>()));
      }
    } else if (key == "T_grid") {
      if (!v.is_array()) bad_type(key, "an array of sample sizes");
      c.T_grid.clear();
      for (const auto& t : v) c.T_grid.push_back(get_unsigned(t, key));
    } else if (key == "kappa_grid") {
      if (!v.is_array()) bad_type(key, "an array of numbers");
      c.kappa_grid.clear();
      for (const auto& k : v) c.kappa_grid.push_back(get_number(k, key));
    } else if (key == "trials") {
      c.trials = get_unsigned(v, key);
    } else if (key == "I_max") {
      c.I_max = get_unsigned(v, key);
    } else if (key == "base_seed") {
      c.base_seed = get_unsigned(v, key);
    } else if (key == "d") {
      c.d = get_number(v, key);
    } else if (key == "behavior_gain") {
      c.behavior_gain = get_draw(v, key);
    } else if (key == "sigma_eta") {
      c.sigma_eta = get_number(v, key);
    } else if (key == "beta_low") {
      c.beta_low = get_number(v, key);
    } else if (key == "beta_high") {
      c.beta_high = get_number(v, key);
    } else if (key == "pg_init") {
      c.pg_init = get_draw(v, key);
    } else if (key == "pg_learning_rate") {
      c.pg_learning_rate = get_number(v, key);
    } else if (key == "pg_steps") {
      c.pg_steps = get_unsigned(v, key);
    } else if (key == "olspi_inner") {
      c.olspi_inner = get_unsigned(v, key);
    } else if (key == "olspi_outer") {
      c.olspi_outer = get_unsigned(v, key);
    } else if (key == "eval_horizon") {
      c.eval_horizon = get_unsigned(v, key);
    } else if (key == "portfolio_seed") {
      c.portfolio_seed = get_unsigned(v, key);
    } else if (key == "record_timing") {
      if (!v.is_boolean()) bad_type(key, "a boolean");
      c.record_timing = v.get<bool>();
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const ExperimentConfig& defaults) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), defaults);
}

Problem make_problem(const ExperimentConfig& cfg) {
  if (cfg.problem == "datacenter") return datacenter_problem();
  if (cfg.problem == "portfolio") {
    const ReturnsTable table =
        synthetic_returns(cfg.portfolio_seed, 5000, default_generator(3));
    return portfolio_problem(portfolio_params_from_returns(table));
  }
  throw ConfigError("unknown problem '" + cfg.problem + "'");
}

std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg,
                                   const Problem& problem,
                                   const DareSolution& optimum,
                                   const CostSpec& cost, std::size_t T,
                                   std::size_t trial) {
  const std::uint64_t seed = derive_seed(
      cfg.base_seed, {static_cast<std::uint64_t>(T),
                      std::bit_cast<std::uint64_t>(cost.kappa),
                      static_cast<std::uint64_t>(trial)});
  Engine draws = make_engine(seed, "draws");
  const double beta = uniform_draw(draws, {cfg.beta_low, cfg.beta_high});
  const double alpha = uniform_draw(draws, cfg.behavior_gain);
  const double alpha0 = uniform_draw(draws, cfg.pg_init);

  TrialContext ctx{cfg, problem, cost, T, seed,
                   SymMatrix::scaled_identity(problem.sys.n(), beta)};
  ctx.alpha = alpha;
  ctx.alpha0 = alpha0;
  const std::uint64_t eval_seed = derive_seed(seed, {hash_tag("eval")});

  std::vector<TrialRecord> out;
  out.reserve(cfg.methods.size());
  for (Method method : cfg.methods) {
    TrialRecord rec;
    rec.method = method;
    rec.T = T;
    rec.kappa = cost.kappa;
    rec.trial = trial;
    rec.seed = seed;
    rec.beta = beta;
    rec.alpha = alpha;
    rec.alpha0 = alpha0;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const GainMatrix K = solve_method(method, ctx);
      rec.gain = K;
      if (quadratic_equivalent(cost)) {
        const Evaluation ev = evaluate_gain(problem.sys, cost.quad(), K, optimum);
        rec.stabilizing = ev.stabilizing;
        rec.rel_error = ev.rel_error;
        rec.final_cost = ev.cost;
      } else if (K.allFinite() && is_stabilizing(problem.sys, K)) {
        rec.stabilizing = true;
        rec.final_cost = empirical_average_cost(problem.sys, K, cost,
                                                cfg.eval_horizon, eval_seed);
      }
      if (!rec.stabilizing) rec.failure = "gain does not stabilize the plant";
    } catch (const Error& e) {
      rec.failure = e.what();
      rec.stabilizing = false;
      rec.rel_error.reset();
      rec.final_cost.reset();
    }
    if (cfg.record_timing) {
      rec.wall_time_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ADP_THREADS"); env && *env) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || v == 0) {
      throw ConfigError(std::string("ADP_THREADS must be a positive integer, got '") +
                        env + "'");
    }
    return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<TrialRecord> run_convergence_sweep(const ExperimentConfig& cfg,
                                               std::size_t threads) {
  cfg.validate();
  const Problem problem = make_problem(cfg);
  const DareSolution optimum = solve_dare(problem.sys, problem.cost);
  const CostSpec cost = CostSpec::quadratic(problem.cost);
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (auto T : cfg.T_grid) {
    for (std::size_t k = 0; k < cfg.trials; ++k) cells.emplace_back(T, k);
  }
  return run_cells<std::pair<std::size_t, std::size_t>>(
      cells, threads, [&](const auto& c) {
        return run_trial(cfg, problem, optimum, cost, c.first, c.second);
      });
}

std::vector<TrialRecord> run_adaptivity_sweep(const ExperimentConfig& cfg,
                                              std::size_t threads) {
  cfg.validate();
  for (double k : cfg.kappa_grid) {
    if (!(k >= 1.0 && k <= 3.0)) {
      throw ConfigError("config: kappa values must lie in [1, 3], got " +
                        fmt_double(k));
    }
  }
  const Problem problem = make_problem(cfg);
  const DareSolution optimum = solve_dare(problem.sys, problem.cost);
  using Cell = std::tuple<double, std::size_t, std::size_t>;
  std::vector<Cell> cells;
  for (double k : cfg.kappa_grid) {
    for (auto T : cfg.T_grid) {
      for (std::size_t t = 0; t < cfg.trials; ++t) cells.emplace_back(k, T, t);
    }
  }
  return run_cells<Cell>(cells, threads, [&](const Cell& c) {
    const CostSpec cost = CostSpec::power(problem.cost, std::get<0>(c));
    return run_trial(cfg, problem, optimum, cost, std::get<1>(c), std::get<2>(c));
  });
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - double(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records,
                                  SummaryMetric metric) {
  using Key = std::tuple<Method, std::size_t, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const TrialRecord*>> groups;
  for (const auto& r : records) {
    const Key k{r.method, r.T, r.kappa};
    auto [it, inserted] = groups.try_emplace(k);
    if (inserted) order.push_back(k);
    it->second.push_back(&r);
  }
  std::vector<SummaryRow> rows;
  for (const auto& k : order) {
    const auto& g = groups[k];
    SummaryRow row;
    row.method = std::get<0>(k);
    row.T = std::get<1>(k);
    row.kappa = std::get<2>(k);
    row.n_trials = g.size();
    std::size_t stable = 0;
    std::vector<double> vals;
    for (const TrialRecord* r : g) {
      if (!r->stabilizing) continue;
      ++stable;
      const auto& v = metric == SummaryMetric::rel_error ? r->rel_error : r->final_cost;
      if (v) vals.push_back(*v);
    }
    row.stability_fraction = double(stable) / double(g.size());
    if (!vals.empty()) {
      row.median = quantile(vals, 0.5);
      row.q25 = quantile(vals, 0.25);
      row.q75 = quantile(vals, 0.75);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_trials_csv(const std::vector<TrialRecord>& records, bool with_timing,
                      std::ostream& os) {
  os << "method,T,kappa,seed,stabilizing,rel_error,final_cost,wall_time_ms\n";
  for (const auto& r : records) {
    os << method_name(r.method) << ',' << r.T << ',' << fmt_double(r.kappa) << ','
       << r.seed << ',' << (r.stabilizing ? 1 : 0) << ',' << fmt_opt(r.rel_error)
       << ',' << fmt_opt(r.final_cost) << ','
       << (with_timing ? fmt_double(r.wall_time_ms) : std::string()) << '\n';
  }
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os) {
  os << "method,T,kappa,median,q25,q75,stability_fraction,n_trials\n";
  for (const auto& r : rows) {
    os << method_name(r.method) << ',' << r.T << ',' << fmt_double(r.kappa) << ','
       << fmt_opt(r.median) << ',' << fmt_opt(r.q25) << ',' << fmt_opt(r.q75)
       << ',' << fmt_double(r.stability_fraction) << ',' << r.n_trials << '\n';
  }
}

void emit_report(const std::vector<TrialRecord>& records,
                 const std::filesystem::path& dir, SummaryMetric metric,
                 bool with_timing) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("report: cannot create " + dir.string() + ": " + ec.message());
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("report: cannot write " + p.string());
    return f;
  };
  {
    auto f = open(dir / "trials.csv");
    write_trials_csv(records, with_timing, f);
    if (!f) throw IoError("report: write failed for trials.csv");
  }
  {
    auto f = open(dir / "summary.csv");
    write_summary_csv(summarize(records, metric), f);
    if (!f) throw IoError("report: write failed for summary.csv");
  }
}

PortfolioReport run_portfolio_pipeline(const ReturnsTable& returns,
                                       const PortfolioRunConfig& cfg) {
  PortfolioReport rep;
  rep.params = portfolio_params_from_returns(returns, cfg.shrink);
  rep.problem = portfolio_problem(rep.params);
  rep.optimum = solve_dare(rep.problem.sys, rep.problem.cost);
  const Eigen::Index n = rep.problem.sys.n();
  const Eigen::Index m = rep.problem.sys.m();
  RlsviConfig rc;
  rc.P0 = SymMatrix::zero(n);
  rc.I_max = cfg.I_max;
  rc.T = cfg.T;
  rc.d = cfg.d;
  rc.Sigma_eta = SymMatrix::identity(m);
  rc.K_c = Matrix::Zero(m, n);
  rc.seed = cfg.seed;
  rc.rescaled = cfg.rescaled;
  rep.result = run_rlsvi(
      make_sampler(rep.problem.sys, CostSpec::quadratic(rep.problem.cost)), rc);
  rep.evaluation = evaluate_gain(rep.problem.sys, rep.problem.cost,
                                 rep.result.K_hat, rep.optimum);
  return rep;
}

}  // namespace adp
