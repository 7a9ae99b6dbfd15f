// Regression features and sample moments for least-squares Hamiltonian
// estimation.
//
// For y_t = [x_t; u_t] the feature is z_t = [svec(y_t y_tᵀ); 1] and
// α_t = ‖z_t‖∞ (or 1 without rescaling). The moments
//
//   Θ = avg z zᵀ/α²,   Ψ = avg z X̃ᵀ/α²,   Ξ = avg z c/α²,
//
// with X̃ = svec(X_{t+1} X_{t+1}ᵀ), satisfy Θ [svec(Q(P)); μ(P)] = Ψ svec(P) + Ξ
// in the population, μ(P) = tr(CᵀPC). The estimator solves that system with
// a pseudoinverse of Θ that is computed once per dataset.

#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "adp/lqr.hpp"
#include "adp/sim.hpp"

namespace adp {

struct Feature {
  Vector z;             // length tri(n+m) + 1, last entry 1
  double alpha = 1.0;   // ‖z‖∞ when rescaled, else 1
  Vector X_tilde;       // svec(X_{t+1} X_{t+1}ᵀ)
  double cost = 0.0;
};

Feature build_feature(const Eigen::Ref<const Vector>& x,
                      const Eigen::Ref<const Vector>& u,
                      const Eigen::Ref<const Vector>& X_next, double cost,
                      bool rescaled);

std::vector<Feature> build_features(const TrajectoryBatch& batch, bool rescaled);

struct DataMatrices {
  SymMatrix Theta;  // (l̃+1)×(l̃+1)
  Matrix Psi;       // (l̃+1)×ñ
  Vector Xi;        // l̃+1
  std::size_t T = 0;
  bool rescaled = true;
  Eigen::Index n = 0;
  Eigen::Index m = 0;

  Eigen::Index feature_dim() const { return Theta.dim(); }
};

/// Sample averages over t = 0..T−1, accumulated in fixed-size chunks so the
/// result is bit-stable for a given T. Throws InputError on an empty batch.
DataMatrices build_data_matrices(const TrajectoryBatch& batch, bool rescaled);

/// Exact population moments for a finite-support distribution over (x, u)
/// pairs with the given weights; the successor expectation uses
/// E[X̃] = svec((Ax+Bu)(Ax+Bu)ᵀ + CCᵀ). Weights are normalized internally.
DataMatrices population_moments(const LinearSystem& sys, const QuadCost& cost,
                                const std::vector<Vector>& x_support,
                                const std::vector<Vector>& u_support,
                                const std::vector<double>& weights,
                                bool rescaled);

struct HamiltonianEstimate {
  Hamiltonian Q;
  double mu = 0.0;
  bool excitation_warning = false;
};

/// Caches Θ†Ψ and Θ†Ξ so that each estimate is a matrix-vector product.
class HamiltonianEstimator {
 public:
  explicit HamiltonianEstimator(const DataMatrices& dm);

  /// [svec(Q̂); μ̂] = Θ†Ψ svec(P) + Θ†Ξ.
  HamiltonianEstimate estimate(const ValueMatrix& P) const;

  /// The affine map's linear part Θ†Ψ and offset Θ†Ξ.
  const Matrix& linear() const { return theta_pinv_psi_; }
  const Vector& offset() const { return theta_pinv_xi_; }
  Eigen::Index theta_rank() const { return rank_; }
  bool rank_deficient() const { return rank_ < full_rank_; }
  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return m_; }

 private:
  Matrix theta_pinv_psi_;
  Vector theta_pinv_xi_;
  Eigen::Index rank_ = 0;
  Eigen::Index full_rank_ = 0;
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
};

/// One-shot convenience wrapper around HamiltonianEstimator.
HamiltonianEstimate estimate_hamiltonian(const DataMatrices& dm,
                                         const ValueMatrix& P);

struct ExcitationCheck {
  bool ok = false;
  double eig_min = 0.0;
};

inline constexpr double kDefaultExcitationFloor = 1e-8;

/// ok iff eig_min(Θ) ≥ c_min.
ExcitationCheck check_excitation(const DataMatrices& dm,
                                 double c_min = kDefaultExcitationFloor);

/// CSV snapshot: `n,m,T,rescaled` header line, then Θ rows, Ψ rows and Ξ as
/// a single row, all at full double precision.
void write_data_matrices(const DataMatrices& dm, std::ostream& os);
DataMatrices read_data_matrices(std::istream& is);

}  // namespace adp
