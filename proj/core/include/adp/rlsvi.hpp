// Robust least-squares value iteration.
//
// One pass of data collection builds Θ_T, Ψ_T, Ξ_T; afterwards every
// iteration is
//
//   Q̂_i     = smat(drop_last(Θ†Ψ svec(P̂_i) + Θ†Ξ))
//   P̂_{i+1} = H(Q̂_i)
//
// and the learned gain is K̂ = [Q̂_{I_max}]uu† [Q̂_{I_max}]ux. The solver only
// sees trajectories through a Sampler; it never reads A, B, C, S or R.

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "adp/datamat.hpp"
#include "adp/lqr.hpp"
#include "adp/sim.hpp"

namespace adp {

/// Produces a trajectory batch for a behavior policy and reset config.
using Sampler = std::function<TrajectoryBatch(
    const BehaviorPolicy&, const ResetConfig&, std::size_t T)>;

/// Closes over a true system; the resulting Sampler is the only view of the
/// plant that run_rlsvi gets.
Sampler make_sampler(LinearSystem sys, CostSpec cost);

struct RlsviConfig {
  ValueMatrix P0;
  std::size_t I_max = 100;
  std::size_t T = 100000;
  double d = 1000.0;
  SymMatrix Sigma_eta;
  GainMatrix K_c;
  std::uint64_t seed = 0;
  bool rescaled = true;

  void validate() const;
};

struct IterationDiagnostics {
  double step_norm = 0.0;   // ‖P̂_{i+1} − P̂_i‖₂
  double quu_eig_min = 0.0; // eig_min([Q̂_i]uu)
  bool pinv_fallback = false;
};

enum class RlsviStatus { ok, diverged };

struct RlsviResult {
  std::vector<ValueMatrix> P_trace;  // P̂_0 .. P̂_{I_max}
  Hamiltonian Q_final;
  GainMatrix K_hat;
  double excitation_eig_min = 0.0;
  bool excitation_warning = false;
  std::vector<IterationDiagnostics> diagnostics;
  std::size_t pinv_fallbacks = 0;
  RlsviStatus status = RlsviStatus::ok;
};

/// Divergence guard on ‖P̂_i‖₂.
inline constexpr double kDivergenceBound = 1e12;

/// Guarded Schur complement: PD solve when eig_min(uu) > 1e-10, otherwise the
/// pseudoinverse. Sets `used_pinv` accordingly.
SymMatrix guarded_schur(const Hamiltonian& q, double* quu_eig_min,
                        bool* used_pinv);

/// The value-iteration loop on fixed data matrices (also usable with
/// population moments).
RlsviResult rlsvi_iterate(const DataMatrices& dm, const ValueMatrix& P0,
                          std::size_t I_max);

/// Full algorithm: one sampling pass, data matrices, then rlsvi_iterate.
/// Throws NumericalError (with iteration index) when NaN appears.
RlsviResult run_rlsvi(const Sampler& sampler, const RlsviConfig& cfg);

struct Evaluation {
  bool stabilizing = false;
  std::optional<double> rel_error;  // tr(Cᵀ(P̂−P*)C) / tr(CᵀP*C)
  std::optional<double> cost;       // tr(CᵀP̂C)
};

/// Evaluates a gain on the true system. Non-stabilizing gains are a valid
/// outcome with no cost attached.
Evaluation evaluate_gain(const LinearSystem& sys, const QuadCost& cost,
                         const GainMatrix& K, const DareSolution& optimum);
Evaluation evaluate_gain(const LinearSystem& sys, const QuadCost& cost,
                         const GainMatrix& K);
Evaluation evaluate_result(const LinearSystem& sys, const QuadCost& cost,
                           const RlsviResult& res);

/// `iter,step_norm,quu_eigmin` rows.
void write_rlsvi_diagnostics(const RlsviResult& res, std::ostream& os);
/// Single-record summary `iterations,final_step_norm,excitation_eig_min,
/// pinv_fallbacks,status`.
void write_rlsvi_summary(const RlsviResult& res, std::ostream& os);

}  // namespace adp
