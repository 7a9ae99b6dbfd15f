#include "adp/rlsvi.hpp"

#include <iomanip>
#include <ostream>
#include <string>

#include "adp/errors.hpp"

namespace adp {

Sampler make_sampler(LinearSystem sys, CostSpec cost) {
  return [sys = std::move(sys), cost = std::move(cost)](
             const BehaviorPolicy& policy, const ResetConfig& reset,
             std::size_t T) { return simulate(sys, policy, cost, reset, T); };
}

void RlsviConfig::validate() const {
  if (I_max < 1) throw ConfigError("R-LSVI: I_max must be at least 1");
  if (T < 1) throw ConfigError("R-LSVI: T must be at least 1");
  if (!(d > 0.0)) throw ConfigError("R-LSVI: reset bound must be positive");
  if (!is_psd(P0)) throw ConfigError("R-LSVI: P0 must be positive semidefinite");
  BehaviorPolicy{K_c, Sigma_eta}.validate();
  if (K_c.cols() != P0.dim()) {
    throw DimensionError("R-LSVI: behavior gain and P0 disagree on n");
  }
}

SymMatrix guarded_schur(const Hamiltonian& q, double* quu_eig_min,
                        bool* used_pinv) {
  const Matrix uu = q.uu();
  const Matrix ux = q.ux();
  Eigen::SelfAdjointEigenSolver<Matrix> es(uu, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  if (quu_eig_min) *quu_eig_min = lo;
  Matrix sol;
  bool fallback = false;
  if (lo > 1e-10) {
    Eigen::LLT<Matrix> llt(uu);
    if (llt.info() == Eigen::Success) {
      sol = llt.solve(ux);
    } else {
      fallback = true;
    }
  } else {
    fallback = true;
  }
  if (fallback) sol = pinv(uu) * ux;
  if (used_pinv) *used_pinv = fallback;
  return SymMatrix(q.xx() - ux.transpose() * sol);
}

RlsviResult rlsvi_iterate(const DataMatrices& dm, const ValueMatrix& P0,
                          std::size_t I_max) {
  const HamiltonianEstimator est(dm);
  RlsviResult res;
  res.excitation_eig_min = eig_min(dm.Theta);
  res.excitation_warning = est.rank_deficient();
  res.P_trace.reserve(I_max + 1);
  res.P_trace.push_back(P0);
  res.diagnostics.reserve(I_max);

  for (std::size_t i = 0; i < I_max; ++i) {
    const ValueMatrix& P = res.P_trace.back();
    const HamiltonianEstimate qi = est.estimate(P);
    IterationDiagnostics diag;
    ValueMatrix next = guarded_schur(qi.Q, &diag.quu_eig_min, &diag.pinv_fallback);
    if (!next.matrix().allFinite()) {
      throw NumericalError("R-LSVI: non-finite value iterate", i + 1);
    }
    diag.step_norm = norm2(next.matrix() - P.matrix());
    if (diag.pinv_fallback) ++res.pinv_fallbacks;
    res.diagnostics.push_back(diag);
    res.P_trace.push_back(std::move(next));
    if (norm2(res.P_trace.back().matrix()) > kDivergenceBound) {
      res.status = RlsviStatus::diverged;
      break;
    }
  }

  const HamiltonianEstimate last = est.estimate(res.P_trace.back());
  res.Q_final = last.Q;
  res.K_hat = greedy_gain_pinv(last.Q);
  if (!res.K_hat.allFinite()) {
    throw NumericalError("R-LSVI: non-finite output gain", res.diagnostics.size());
  }
  return res;
}

RlsviResult run_rlsvi(const Sampler& sampler, const RlsviConfig& cfg) {
  cfg.validate();
  const TrajectoryBatch batch = sampler(BehaviorPolicy{cfg.K_c, cfg.Sigma_eta},
                                        ResetConfig{cfg.d, cfg.seed}, cfg.T);
  if (batch.n() != cfg.P0.dim()) {
    throw DimensionError("R-LSVI: sampler state dimension disagrees with P0");
  }
  return rlsvi_iterate(build_data_matrices(batch, cfg.rescaled), cfg.P0,
                       cfg.I_max);
}

Evaluation evaluate_gain(const LinearSystem& sys, const QuadCost& cost,
                         const GainMatrix& K, const DareSolution& optimum) {
  Evaluation ev;
  if (!K.allFinite() || !is_stabilizing(sys, K)) return ev;
  ev.stabilizing = true;
  const PolicyCost pc = lyapunov_policy_cost(sys, cost, K);
  ev.cost = pc.J;
  const Matrix diff = sys.C.transpose() * (pc.P.matrix() - optimum.P.matrix()) * sys.C;
  ev.rel_error = diff.trace() / optimum.J;
  return ev;
}

Evaluation evaluate_gain(const LinearSystem& sys, const QuadCost& cost,
                         const GainMatrix& K) {
  return evaluate_gain(sys, cost, K, solve_dare(sys, cost));
}

Evaluation evaluate_result(const LinearSystem& sys, const QuadCost& cost,
                           const RlsviResult& res) {
  return evaluate_gain(sys, cost, res.K_hat);
}

void write_rlsvi_diagnostics(const RlsviResult& res, std::ostream& os) {
  os << "iter,step_norm,quu_eigmin\n" << std::setprecision(17);
  for (std::size_t i = 0; i < res.diagnostics.size(); ++i) {
    os << i << ',' << res.diagnostics[i].step_norm << ','
       << res.diagnostics[i].quu_eig_min << '\n';
  }
}

void write_rlsvi_summary(const RlsviResult& res, std::ostream& os) {
  os << "iterations,final_step_norm,excitation_eig_min,pinv_fallbacks,status\n"
     << std::setprecision(17);
  const double last =
      res.diagnostics.empty() ? 0.0 : res.diagnostics.back().step_norm;
  os << res.diagnostics.size() << ',' << last << ',' << res.excitation_eig_min
     << ',' << res.pinv_fallbacks << ','
     << (res.status == RlsviStatus::ok ? "ok" : "diverged") << '\n';
}

}  // namespace adp
