// Acceptance run: one PASS/FAIL line per criterion, exit status = failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "adp/baselines.hpp"
#include "adp/bench.hpp"
#include "adp/experiments.hpp"
#include "adp/lqr.hpp"
#include "adp/rlsvi.hpp"
#include "oracles.hpp"

using namespace adp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double rel_residual(const Problem& p, const SymMatrix& P) {
  return norm2(P.matrix() - riccati_op(p.sys, p.cost, P).matrix()) / norm2(P.matrix());
}

Outcome dare_correctness() {
  const Problem dc = datacenter_problem();
  ViOptions o;
  o.max_iter = 2000;
  const ViResult r = exact_vi(dc.sys, dc.cost, SymMatrix::zero(3), o);
  const double res = rel_residual(dc, r.P);
  return {r.converged && r.iterations <= 2000 && res <= 1e-9,
          fmt("iterations=%g residual=%.3g", double(r.iterations), res)};
}

Outcome geometric_rate() {
  const Problem dc = datacenter_problem();
  const DareSolution opt = solve_dare(dc.sys, dc.cost);
  oracle::Rng rng(2);
  std::vector<SymMatrix> starts = {SymMatrix::zero(3), 100.0 * opt.P};
  for (int k = 0; k < 18; ++k) {
    if (k % 2 == 0) {
      // P* plus or minus a rank-one offset, clipped back to the PSD cone.
      const Vector v = rng.vector(3).normalized();
      const double size = rng.uniform(0.5, 2.0) * eig_max(opt.P);
      const double sign = (k % 4 == 0) ? 1.0 : -1.0;
      starts.push_back(project_psd(SymMatrix(opt.P.matrix() + sign * size * v * v.transpose())));
    } else {
      starts.push_back(SymMatrix(rng.uniform(0, 300) * rng.spd(3, 0.0) / 3.0));
    }
  }
  ViOptions o;
  o.keep_iterates = true;
  o.max_iter = 600;
  o.tol = 0.0;
  const double floor = 1e-8 * eig_max(opt.P);
  std::vector<std::vector<double>> errs;
  double theta = 0.0;
  int violations = 0;
  for (const SymMatrix& P0 : starts) {
    const ViResult r = exact_vi(dc.sys, dc.cost, P0, o);
    std::vector<double> e;
    for (const SymMatrix& P : r.iterates) e.push_back(norm2(P.matrix() - opt.P.matrix()));
    for (std::size_t i = 5; i + 1 < e.size() && e[i] >= floor; ++i) {
      theta = std::max(theta, e[i + 1] / e[i]);
      if (e[i + 1] > e[i]) ++violations;
    }
    errs.push_back(std::move(e));
  }
  // Smallest α with e_i ≤ α θ̄^i e_0 over the fitted range.
  double alpha = 0.0;
  for (const auto& e : errs) {
    if (e[0] == 0.0) continue;
    for (std::size_t i = 0; i < e.size() && e[i] >= floor; ++i) {
      alpha = std::max(alpha, e[i] / (std::pow(theta, double(i)) * e[0]));
    }
  }
  return {theta < 1.0 && violations == 0 && std::isfinite(alpha),
          fmt("theta=%.6f alpha=%.3g violations=%g", theta, alpha, violations)};
}

Outcome order_preservation() {
  oracle::Rng rng(3);
  int violations = 0;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const int n = 1 + k % 5;
    const int m = 1 + k % 3;
    Matrix A = rng.matrix(n, n);
    A *= 1.1 / std::max(1e-3, spectral_radius(A));
    const LinearSystem sys{A, rng.matrix(n, m), rng.matrix(n, n)};
    const SymMatrix S2(rng.spd(n));
    const SymMatrix S1(S2.matrix() + rng.psd_rank(n, 1));
    const SymMatrix R(rng.spd(m));
    SymMatrix P2(rng.psd_rank(n, n));
    SymMatrix P1(P2.matrix() + rng.psd_rank(n, 1));
    for (int i = 0; i <= 50; ++i) {
      // Absolute floor of 1e-8, relative once iterates grow past unit size.
      const double gap = eig_min(P1 - P2) / std::max(1.0, norm2(P1.matrix()));
      worst = std::min(worst, gap);
      if (gap < -1e-8) ++violations;
      P1 = riccati_op(sys, {S1, R}, P1);
      P2 = riccati_op(sys, {S2, R}, P2);
    }
  }
  return {violations == 0, fmt("violations=%g worst_scaled_eig_min=%.3g", violations, worst)};
}

Outcome iss_plateau() {
  const Problem dc = datacenter_problem();
  const DareSolution opt = solve_dare(dc.sys, dc.cost);
  const double smin = eig_min(dc.cost.S);
  std::vector<double> plateaus;
  for (double f : {0.0, 1e-3, 1e-2, 1e-1}) {
    const auto tr = inexact_vi(dc.sys, dc.cost, opt.P, random_disturbance(3, f * smin, 4), 300);
    double plateau = 0.0;
    for (std::size_t i = 200; i <= 300; ++i) {
      plateau = std::max(plateau, norm2(tr[i].matrix() - opt.P.matrix()));
    }
    plateaus.push_back(plateau);
  }
  const bool monotone = std::is_sorted(plateaus.begin(), plateaus.end());
  return {monotone && plateaus[0] < 1e-6,
          fmt("plateaus=%.3g,%.3g,%.3g,%.3g", plateaus[0], plateaus[1], plateaus[2], plateaus[3])};
}

const SummaryRow* find_row(const std::vector<SummaryRow>& rows, Method m) {
  for (const auto& r : rows) {
    if (r.method == m) return &r;
  }
  return nullptr;
}

std::vector<SummaryRow> convergence_rows;

Outcome convergence_reproduction() {
  ExperimentConfig c = ExperimentConfig::convergence_defaults();
  c.methods = {Method::rlsvi, Method::nominal_vi, Method::nominal_pi, Method::lspi, Method::olspi};
  c.T_grid = {100000};
  c.trials = 20;
  convergence_rows = summarize(run_convergence_sweep(c), SummaryMetric::rel_error);

  ExperimentConfig ab = ExperimentConfig::convergence_defaults();
  ab.methods = {Method::rlsvi, Method::rlsvi_norescale};
  ab.T_grid = {10000};
  ab.trials = 20;
  const auto ab_rows = summarize(run_convergence_sweep(ab), SummaryMetric::rel_error);

  const SummaryRow* r = find_row(convergence_rows, Method::rlsvi);
  const double med = r->median.value_or(std::numeric_limits<double>::infinity());
  const double with = find_row(ab_rows, Method::rlsvi)->stability_fraction;
  const double without = find_row(ab_rows, Method::rlsvi_norescale)->stability_fraction;
  return {r->stability_fraction == 1.0 && med <= 1e-2 && with >= without,
          fmt("stability=%.2f median_rel=%.3g ablation_T1e4 rescaled=%.2f raw=%.2f",
              r->stability_fraction, med, with, without)};
}

Outcome pi_initialization() {
  // Reuses the T = 1e5 sweep from the previous criterion.
  const double pi = find_row(convergence_rows, Method::nominal_pi)->stability_fraction;
  const double ls = find_row(convergence_rows, Method::lspi)->stability_fraction;
  const double ol = find_row(convergence_rows, Method::olspi)->stability_fraction;
  const double vi = find_row(convergence_rows, Method::nominal_vi)->stability_fraction;
  return {pi == 0.0 && ls == 0.0 && ol == 1.0 && vi == 1.0,
          fmt("nominal_pi=%.2f lspi=%.2f olspi=%.2f nominal_vi=%.2f", pi, ls, ol, vi)};
}

Outcome kappa_adaptivity() {
  ExperimentConfig c = ExperimentConfig::adaptivity_defaults();
  c.methods = {Method::rlsvi, Method::nominal_vi, Method::nominal_pi};
  c.kappa_grid = {3.0};
  c.T_grid = {100000};
  c.trials = 20;
  const auto rows = summarize(run_adaptivity_sweep(c), SummaryMetric::final_cost);
  const double rl = find_row(rows, Method::rlsvi)->stability_fraction;
  const double vi = find_row(rows, Method::nominal_vi)->stability_fraction;
  const double pi = find_row(rows, Method::nominal_pi)->stability_fraction;

  // κ = 2 through the power-cost path against the quadratic path.
  ExperimentConfig q = c;
  q.methods = all_methods();
  const Problem p = make_problem(q);
  const DareSolution opt = solve_dare(p.sys, p.cost);
  int mismatches = 0;
  for (std::size_t t = 0; t < 20; ++t) {
    const auto a = run_trial(q, p, opt, CostSpec::quadratic(p.cost), 100000, t);
    const auto b = run_trial(q, p, opt, CostSpec::power(p.cost, 2.0), 100000, t);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const bool same = a[i].stabilizing == b[i].stabilizing && a[i].rel_error == b[i].rel_error &&
                        a[i].final_cost == b[i].final_cost && a[i].gain.has_value() == b[i].gain.has_value() &&
                        (!a[i].gain || *a[i].gain == *b[i].gain);
      if (!same) ++mismatches;
    }
  }
  return {vi < 0.2 && pi < 0.2 && rl >= 0.8 && mismatches == 0,
          fmt("kappa3 rlsvi=%.2f nominal_vi=%.2f nominal_pi=%.2f kappa2_mismatches=%g", rl, vi,
              pi, mismatches)};
}

SysIdEstimate exact_estimate(const Problem& p) {
  SysIdEstimate e;
  e.A_hat = p.sys.A;
  e.B_hat = p.sys.B;
  e.S_hat = p.cost.S;
  e.R_hat = p.cost.R;
  return e;
}

DataMatrices moments(const Problem& p, oracle::Rng& rng) {
  std::vector<Vector> xs, us;
  std::vector<double> w;
  for (int k = 0; k < 60; ++k) {
    xs.push_back(rng.vector(p.sys.n()));
    us.push_back(rng.vector(p.sys.m()));
    w.push_back(rng.uniform(0.5, 1.5));
  }
  return population_moments(p.sys, p.cost, xs, us, w, true);
}

Outcome oracle_equivalence() {
  oracle::Rng rng(8);
  const Problem dc = datacenter_problem();
  const DataMatrices dm = moments(dc, rng);
  const SymMatrix P0 = SymMatrix::scaled_identity(3, 0.3);
  const RlsviResult r = rlsvi_iterate(dm, P0, 100);
  ViOptions o;
  o.keep_iterates = true;
  o.max_iter = 100;
  o.tol = 0.0;
  const ViResult ex = exact_vi(dc.sys, dc.cost, P0, o);
  double iterate_gap = r.P_trace.size() == ex.iterates.size() ? 0.0 : 1.0;
  for (std::size_t i = 0; i < std::min(r.P_trace.size(), ex.iterates.size()); ++i) {
    const double scale = std::max(1.0, ex.iterates[i].matrix().cwiseAbs().maxCoeff());
    iterate_gap = std::max(
        iterate_gap, (r.P_trace[i].matrix() - ex.iterates[i].matrix()).cwiseAbs().maxCoeff() / scale);
  }

  double gain_gap = 0.0;
  std::vector<Problem> problems = {dc};
  for (int k = 0; k < 5; ++k) {
    Problem p;
    p.sys = {rng.matrix(2, 2), rng.matrix(2, 1), rng.matrix(2, 2)};
    p.cost = {SymMatrix(rng.spd(2)), SymMatrix(rng.spd(1))};
    problems.push_back(p);
  }
  bool all_ok = true;
  for (const Problem& p : problems) {
    const DareSolution opt = solve_dare(p.sys, p.cost);
    const DataMatrices pm = moments(p, rng);
    const Matrix K0 = opt.K + 1e-3 * rng.matrix(p.sys.m(), p.sys.n());
    const SolverOutcome outs[] = {
        nominal_vi(exact_estimate(p)), lspi(pm, K0),
        olspi(pm, K0, SymMatrix::zero(p.sys.n()), 2000, 30)};
    for (const auto& s : outs) {
      if (!s.ok()) {
        all_ok = false;
        continue;
      }
      gain_gap = std::max(gain_gap, (*s.gain - opt.K).norm());
    }
  }
  return {all_ok && iterate_gap <= 1e-9 && gain_gap <= 1e-8,
          fmt("rlsvi_vs_vi=%.3g gain_gap=%.3g", iterate_gap, gain_gap)};
}

Outcome matrix_calculus() {
  oracle::Rng rng(9);
  double worst = 0.0;
  auto track = [&](double v) { worst = std::max(worst, v); };
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index n = 1 + k % 6;
    const Matrix A = rng.matrix(n, n + 1);
    const Matrix B = rng.matrix(n + 1, n + 2);
    const Matrix C = rng.matrix(n + 2, n);
    // vec(ABC) = (Cᵀ ⊗ A) vec(B) and tr(XᵀY) = vec(X)ᵀvec(Y).
    track((vec(A * B * C) - kron(C.transpose(), A) * vec(B)).norm() / (1 + (A * B * C).norm()));
    const Matrix X = rng.matrix(n, n);
    const Matrix Y = rng.matrix(n, n);
    track(std::abs((X.transpose() * Y).trace() - vec(X).dot(vec(Y))) / (1 + X.norm() * Y.norm()));
    // Quadratic forms through tilde: zᵀ M z = svec(M)ᵀ tilde(z).
    const SymMatrix M(rng.sym(n));
    const Vector z = rng.vector(n);
    track(std::abs(z.dot(M.matrix() * z) - svec(M).data.dot(tilde(z).data)) / (1 + M.matrix().norm() * z.squaredNorm()));
    // svec isometry.
    const SymMatrix U(rng.sym(n));
    track(std::abs((M.matrix() * U.matrix()).trace() - svec(M).data.dot(svec(U).data)) /
          (1 + M.matrix().norm() * U.matrix().norm()));
    // Schur determinant identity det(Q) = det(Q_uu) det(Q/Q_uu).
    const Eigen::Index m = 1 + k % 3;
    const SymMatrix Q(rng.spd(n + m));
    const Matrix Quu = Q.matrix().bottomRightCorner(m, m);
    const double lhs = Q.matrix().determinant();
    const double rhs = Quu.determinant() * schur_uu(Q, n).matrix().determinant();
    track(std::abs(lhs - rhs) / std::abs(lhs));
    // Penrose conditions on a rank-deficient rectangular matrix.
    const Matrix G = rng.matrix(n + 1, 2) * rng.matrix(2, n);
    const Matrix Gp = pinv(G);
    const double gs = 1 + G.norm() * Gp.norm() * G.norm();
    track((G * Gp * G - G).norm() / gs);
    track((Gp * G * Gp - Gp).norm() / (1 + Gp.norm() * G.norm() * Gp.norm()));
    track(((G * Gp).transpose() - G * Gp).norm() / gs);
    track(((Gp * G).transpose() - Gp * G).norm() / gs);
    // Cholesky reconstruction.
    const SymMatrix H(rng.spd(n));
    const Matrix Rc = chol_upper(H);
    track((Rc.transpose() * Rc - H.matrix()).norm() / H.matrix().norm());
  }
  return {worst <= 1e-9, fmt("worst_relative_defect=%.3g over 100 draws each", worst)};
}

PortfolioParams random_params(oracle::Rng& rng) {
  PortfolioParams p;
  p.N = 1 + static_cast<Eigen::Index>(rng.uniform(0, 4));
  p.M = 1 + static_cast<Eigen::Index>(rng.uniform(0, 4));
  p.gamma = rng.uniform(0.1, 100.0);
  p.Lambda = SymMatrix(rng.spd(p.N, 0.01));
  Matrix D = rng.matrix(p.M, p.M);
  D *= rng.uniform(0.05, 0.95) / spectral_radius(D);
  p.Phi = Matrix::Identity(p.M, p.M) - D;
  p.Pi = rng.matrix(p.N, p.M);
  p.Sigma = SymMatrix(rng.spd(p.N, 0.01));
  p.Omega = SymMatrix(rng.spd(p.M, 0.01));
  return p;
}

Outcome portfolio_construction() {
  oracle::Rng rng(10);
  int bad = 0;
  double worst_rho = 0.0;
  for (int k = 0; k < 100; ++k) {
    const PortfolioParams p = random_params(rng);
    const Problem pr = portfolio_problem(p);
    const Matrix Acl = pr.sys.A - pr.sys.B * portfolio_witness_gain(p);
    const double gap =
        std::abs(spectral_radius(Acl) - spectral_radius(Matrix::Identity(p.M, p.M) - p.Phi));
    worst_rho = std::max(worst_rho, gap);
    if (!(eig_min(pr.cost.S) > 0.0) || gap > 1e-9) ++bad;
  }
  PortfolioRunConfig rc;
  rc.T = 10000;
  const PortfolioReport rep = run_portfolio_pipeline(synthetic_returns(0, 5000, default_generator(3)), rc);
  const double rel = rep.evaluation.rel_error.value_or(std::numeric_limits<double>::infinity());
  return {bad == 0 && rep.evaluation.stabilizing && rel <= 0.1,
          fmt("bad_params=%g worst_rho_gap=%.3g pipeline_stabilizing=%g rel_error=%.3g", bad,
              worst_rho, rep.evaluation.stabilizing ? 1 : 0, rel)};
}

Outcome gradient_check() {
  const Problem dc = datacenter_problem();
  oracle::Rng rng(11);
  double worst = 0.0;
  int checked = 0;
  while (checked < 10) {
    const Matrix K = rng.uniform(0.1, 1.0) * Matrix::Identity(3, 3) + 0.05 * rng.matrix(3, 3);
    if (!is_stabilizing(dc.sys, K)) continue;
    const Matrix g = lqr_cost_gradient(dc.sys, dc.cost, K);
    const Matrix fd = oracle::fd_gradient(
        [&](const Matrix& k) { return lyapunov_policy_cost(dc.sys, dc.cost, k).J; }, K, 1e-5);
    worst = std::max(worst, (g - fd).norm() / g.norm());
    ++checked;
  }
  return {worst <= 1e-5, fmt("worst_relative_error=%.3g", worst)};
}

std::string trials_csv(const std::vector<TrialRecord>& recs) {
  std::ostringstream os;
  write_trials_csv(recs, false, os);
  return os.str();
}

Outcome determinism() {
  ExperimentConfig c = ExperimentConfig::convergence_defaults();
  c.T_grid = {1000, 10000};
  c.trials = 4;
  const std::string a = trials_csv(run_convergence_sweep(c, 1));
  const std::string b = trials_csv(run_convergence_sweep(c, 4));
  const std::string a2 = trials_csv(run_convergence_sweep(c, 1));

  ExperimentConfig k = ExperimentConfig::adaptivity_defaults();
  k.methods = {Method::rlsvi, Method::nominal_vi, Method::lspi};
  k.T_grid = {10000};
  k.kappa_grid = {1.0, 2.0, 3.0};
  k.trials = 2;
  k.eval_horizon = 10000;
  const std::string x = trials_csv(run_adaptivity_sweep(k, 1));
  const std::string y = trials_csv(run_adaptivity_sweep(k, 4));
  return {a == b && a == a2 && x == y,
          fmt("convergence_rows=%g kappa_rows=%g", double(std::count(a.begin(), a.end(), '\n') - 1),
              double(std::count(x.begin(), x.end(), '\n') - 1))};
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"dare_correctness", 1, dare_correctness},
      {"geometric_rate", 10, geometric_rate},
      {"order_preservation", 30, order_preservation},
      {"iss_plateau", 30, iss_plateau},
      {"convergence_reproduction", 600, convergence_reproduction},
      {"pi_initialization_failure", 600, pi_initialization},
      {"kappa_adaptivity", 900, kappa_adaptivity},
      {"oracle_equivalence", 5, oracle_equivalence},
      {"matrix_calculus", 5, matrix_calculus},
      {"portfolio_construction", 300, portfolio_construction},
      {"gradient_check", 10, gradient_check},
      {"determinism", 60, determinism},
  };
  int failures = 0;
  int index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s %2d %s: %s (%.2fs, budget %gs%s)\n", pass ? "PASS" : "FAIL", index, c.name,
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", index - failures, index);
  return failures;
}
