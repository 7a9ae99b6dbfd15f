// Reset-dynamics simulator and stage costs.
//
// From x₀ = 0 the sampler applies the behavior policy u_t = −K_c x_t + η,
// draws X_{t+1} = A x_t + B u_t + C ε and keeps x_{t+1} = X_{t+1} unless
// ‖X_{t+1}‖∞ > d, in which case the chain restarts at zero. Both X_{t+1}
// and x_{t+1} are recorded; regression targets use the un-reset X_{t+1}.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "adp/lqr.hpp"

namespace adp {

struct BehaviorPolicy {
  GainMatrix K_c;        // m×n, need not stabilize
  SymMatrix Sigma_eta;   // m×m exploration covariance

  /// Throws ConfigError unless Sigma_eta is positive definite.
  void validate() const;
};

struct ResetConfig {
  double d = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
};

struct TrajectoryBatch {
  RowMatrix x;        // T×n pre-step states
  RowMatrix u;        // T×m inputs
  RowMatrix X_next;   // T×n un-reset successors
  Vector cost;        // T stage costs c(x_t, u_t)
  std::vector<std::uint8_t> reset_flags;  // 1 when x_{t+1} was reset to 0

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
  Eigen::Index n() const { return x.cols(); }
  Eigen::Index m() const { return u.cols(); }

  bool operator==(const TrajectoryBatch&) const = default;
};

enum class CostKind { quadratic, power };

/// c = xᵀSx + uᵀRu (quadratic) or xᵀSx + (|u|^{κ/2})ᵀ R |u|^{κ/2} (power).
struct CostSpec {
  CostKind kind = CostKind::quadratic;
  SymMatrix S;
  SymMatrix R;
  double kappa = 2.0;

  static CostSpec quadratic(const QuadCost& c) {
    return {CostKind::quadratic, c.S, c.R, 2.0};
  }
  static CostSpec power(const QuadCost& c, double kappa) {
    return {CostKind::power, c.S, c.R, kappa};
  }
  QuadCost quad() const { return {S, R}; }

  /// Throws ConfigError for κ outside [1, 3] on the power kind.
  void validate() const;
};

double stage_cost(const CostSpec& spec, const Eigen::Ref<const Vector>& x,
                  const Eigen::Ref<const Vector>& u);

/// Runs T steps of the reset chain. Deterministic in `reset.seed`.
/// Sigma_eta may be PSD here (a zero covariance gives noise-free inputs).
/// Throws SimulationError if a state becomes non-finite before a reset.
TrajectoryBatch simulate(const LinearSystem& sys, const BehaviorPolicy& policy,
                         const CostSpec& cost, const ResetConfig& reset,
                         std::size_t T);

/// Monte-Carlo average of the stage cost along u = −Kx from x₀ = 0 over T
/// steps. Throws StabilityError when K does not stabilize the system.
double empirical_average_cost(const LinearSystem& sys, const GainMatrix& K,
                              const CostSpec& cost, std::size_t T,
                              std::uint64_t seed);

/// Header `t,x_0..,u_0..,Xn_0..,cost,reset` then one row per step.
void write_trajectory_csv(const TrajectoryBatch& batch, std::ostream& os);

}  // namespace adp
