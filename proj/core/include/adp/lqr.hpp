// Model-based stochastic LQR machinery.
//
// Plant:  x⁺ = A x + B u + C ε,   ε ~ (0, I)
// Cost:   c(x, u) = xᵀ S x + uᵀ R u,  averaged over an infinite horizon.
//
// The Hamiltonian Q(P) = [AᵀPA + S, AᵀPB; BᵀPA, BᵀPB + R] and its
// uu-Schur complement give the Riccati operator P ↦ H(Q(P)); value
// iteration applies that map repeatedly from any PSD start.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "adp/matlin.hpp"

namespace adp {

struct LinearSystem {
  Matrix A;  // n×n
  Matrix B;  // n×m
  Matrix C;  // n×p

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.cols(); }

  /// Throws DimensionError / InputError on inconsistent or non-finite data.
  void validate() const;
};

struct QuadCost {
  SymMatrix S;  // n×n
  SymMatrix R;  // m×m

  /// Throws ConfigError unless S and R are positive definite.
  void validate_positive() const;
  /// Throws DimensionError unless dimensions agree with `sys`.
  void validate_dims(const LinearSystem& sys) const;
};

using ValueMatrix = SymMatrix;
/// Linear feedback gain, convention u = −K x.
using GainMatrix = Matrix;

/// Block-partitioned symmetric (n+m)×(n+m) matrix.
struct Hamiltonian {
  SymMatrix Q;
  Eigen::Index n = 0;

  Eigen::Index m() const { return Q.dim() - n; }
  Matrix xx() const { return Q.matrix().topLeftCorner(n, n); }
  Matrix ux() const { return Q.matrix().bottomLeftCorner(m(), n); }
  Matrix uu() const { return Q.matrix().bottomRightCorner(m(), m()); }
};

Hamiltonian hamiltonian(const LinearSystem& sys, const QuadCost& cost,
                        const ValueMatrix& P);

/// K = Q[uu]⁻¹ Q[ux]. Throws SingularityError on a singular uu block.
GainMatrix greedy_gain(const Hamiltonian& q);

/// K = Q[uu]† Q[ux]; never throws on singular blocks.
GainMatrix greedy_gain_pinv(const Hamiltonian& q);

/// Induced gain (R + BᵀPB)⁻¹ BᵀPA.
GainMatrix induced_gain(const LinearSystem& sys, const QuadCost& cost,
                        const ValueMatrix& P);

/// AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA + S, with `s_override` replacing S.
ValueMatrix riccati_op(const LinearSystem& sys, const QuadCost& cost,
                       const ValueMatrix& P,
                       const std::optional<SymMatrix>& s_override = std::nullopt);

struct ViOptions {
  std::size_t max_iter = 10000;
  /// Stop when ‖P_{i+1} − P_i‖₂ < tol·max(1, ‖P_i‖₂).
  double tol = 1e-12;
  /// Keep every iterate (P_0 first) in ViResult::iterates.
  bool keep_iterates = false;
};

struct ViResult {
  ValueMatrix P;
  std::vector<double> step_norms;  // ‖P_{i+1} − P_i‖₂ per step
  std::vector<ValueMatrix> iterates;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Exact value iteration. Exhausting `max_iter` is reported through
/// `converged == false`, never thrown.
ViResult exact_vi(const LinearSystem& sys, const QuadCost& cost,
                  const ValueMatrix& P0, const ViOptions& opts = {});

/// Supplies the disturbance Δ_i for iteration i of inexact value iteration.
using DisturbanceSource = std::function<Matrix(std::size_t iteration)>;

/// Inexact value iteration P̂_{i+1} = sym(H(Q(P̂_i)) + Δ_i). Returns all
/// iterates, P̂_0 first. Throws InputError if a disturbance contains NaN.
std::vector<ValueMatrix> inexact_vi(const LinearSystem& sys,
                                    const QuadCost& cost, const ValueMatrix& P0,
                                    const DisturbanceSource& disturbance,
                                    std::size_t max_iter);

/// Zero disturbance.
DisturbanceSource zero_disturbance(Eigen::Index n);

/// iid symmetric disturbances with spectral norm exactly `magnitude`
/// (random direction, seeded).
DisturbanceSource random_disturbance(Eigen::Index n, double magnitude,
                                     std::uint64_t seed);

struct DareSolution {
  ValueMatrix P;
  GainMatrix K;
  double J = 0.0;  // tr(Cᵀ P C)
  std::size_t iterations = 0;
};

/// Stabilizing DARE solution: value iteration from zero, polished with
/// Hewer iterations once the gain stabilizes. Throws ConfigError when the
/// cost is not positive definite and Error on non-convergence.
DareSolution solve_dare(const LinearSystem& sys, const QuadCost& cost,
                        double tol = 1e-12);

/// X = Fᵀ X F + W via the dense Kronecker system
/// (I − Fᵀ⊗Fᵀ) vec(X) = vec(W).
SymMatrix solve_discrete_lyapunov(const Matrix& F, const SymMatrix& W);

struct PolicyCost {
  ValueMatrix P;
  double J = 0.0;
};

/// Evaluates u = −Kx: P̂ = (A−BK)ᵀP̂(A−BK) + S + KᵀRK, J = tr(CᵀP̂C).
/// Throws StabilityError when K does not stabilize (A, B).
PolicyCost lyapunov_policy_cost(const LinearSystem& sys, const QuadCost& cost,
                                const GainMatrix& K);

/// ρ(A − BK) < 1 − 1e-12.
bool is_stabilizing(const LinearSystem& sys, const GainMatrix& K);

}  // namespace adp
