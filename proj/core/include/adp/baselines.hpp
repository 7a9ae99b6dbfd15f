// Comparison solvers: plug-in (identify-then-solve) VI and PI, LSPI,
// O-LSPI and exact-gradient policy gradient.
//
// Every solver returns a SolverOutcome holding either a gain or a failure
// message, so an experiment runner can treat all of them alike.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adp/datamat.hpp"
#include "adp/lqr.hpp"
#include "adp/sim.hpp"

namespace adp {

struct SolverOutcome {
  std::optional<GainMatrix> gain;
  std::string failure;
  std::size_t iterations = 0;
  /// Solver-specific per-iteration record (policy cost, step norm, ...).
  std::vector<double> trace;

  bool ok() const { return gain.has_value(); }
  static SolverOutcome fail(std::string why, std::size_t iters = 0) {
    SolverOutcome o;
    o.failure = std::move(why);
    o.iterations = iters;
    return o;
  }
};

struct SysIdEstimate {
  Matrix A_hat;
  Matrix B_hat;
  SymMatrix S_hat;
  SymMatrix R_hat;
  double mu_hat = 0.0;         // fitted cost intercept
  double dynamics_residual = 0.0;  // RMS of X_{t+1} − [Â B̂] y_t
  double cost_residual = 0.0;      // RMS of the cost regression

  /// Identified plant with a zero noise channel (gains do not depend on C).
  LinearSystem model() const;
  QuadCost cost() const { return {S_hat, R_hat}; }
};

/// Least squares on [x; u] → X_{t+1} (un-reset targets) and on
/// [x̃; ũ; 1] → c_t, optionally weighted by 1/α_t² with α_t = ‖z_t‖∞.
/// Throws IdentificationError when a regressor is rank deficient.
SysIdEstimate sysid_least_squares(const TrajectoryBatch& batch,
                                  bool weighted = false);

/// solve_dare on the identified model. Fails (without throwing) when Ŝ or
/// R̂ is not positive definite or no stabilizing solution is found.
SolverOutcome nominal_vi(const SysIdEstimate& est);

/// Hewer policy iteration on the identified model. Fails (without
/// throwing) when K0 does not stabilize (Â, B̂).
SolverOutcome nominal_pi(const SysIdEstimate& est, const GainMatrix& K0,
                         std::size_t max_iter = 100, double tol = 1e-12);

/// Linear map svec(Q) ↦ svec(MᵀQM) with M = [I_n; −K], of size
/// tri(n) × tri(n+m).
Matrix policy_value_map(const GainMatrix& K);

/// LSTD-Q policy iteration: each evaluation solves
/// (Θ − Ψ G_K [I 0]) [svec(Q_K); μ_K] = Ξ in least squares, then K ← Q_uu⁻¹Q_ux.
SolverOutcome lspi(const DataMatrices& dm, const GainMatrix& K0,
                   std::size_t I_max = 100);

/// Policy iteration with an inner value-iteration evaluation loop:
/// Q ← Θ†(Ψ svec(V) + Ξ), V ← MᵀQM for I_inner steps, then K ← Q_uu⁻¹Q_ux.
/// The inner value V starts at P0 and is carried across outer iterations.
SolverOutcome olspi(const DataMatrices& dm, const GainMatrix& K0,
                    const ValueMatrix& P0, std::size_t I_inner = 20,
                    std::size_t I_outer = 5);

/// Exact average-cost gradient 2((R + BᵀP_K B)K − BᵀP_K A)Σ_K with
/// Σ_K = (A−BK)Σ_K(A−BK)ᵀ + CCᵀ. Requires a stabilizing K.
Matrix lqr_cost_gradient(const LinearSystem& sys, const QuadCost& cost,
                         const GainMatrix& K);

struct PolicyGradientOptions {
  std::size_t steps = 100;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t max_halvings = 30;
  /// Non-quadratic costs: Monte-Carlo horizon and seed of the common random
  /// numbers used for J and its central-difference gradient.
  std::size_t mc_horizon = 2000;
  std::uint64_t mc_seed = 0;
  double fd_step = 1e-4;
};

/// Adam on the exact gradient (quadratic cost) or a common-random-number
/// central-difference gradient (power cost). A step is accepted only if it
/// keeps the loop stable and lowers J; otherwise it is halved. Throws
/// InputError when K0 is not stabilizing.
SolverOutcome policy_gradient(const LinearSystem& sys, const CostSpec& cost,
                              const GainMatrix& K0,
                              const PolicyGradientOptions& opts = {});

}  // namespace adp
