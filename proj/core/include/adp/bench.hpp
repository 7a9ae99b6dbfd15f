// Benchmark problems: a three-zone data-center cooling LQR and a
// multi-asset portfolio problem with price impact and mean-reverting
// return-predicting factors, plus the data plumbing that feeds the latter.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adp/lqr.hpp"

namespace adp {

struct Problem {
  LinearSystem sys;
  QuadCost cost;
};

/// A tridiagonal with 1.01 on the diagonal and 0.01 off it, B = C = S = I₃,
/// R = 1000·I₃.
Problem datacenter_problem();

/// State x = [w; f; r]: holdings (N), factors (M), last returns (N).
struct PortfolioParams {
  Eigen::Index N = 3;
  Eigen::Index M = 3;
  double gamma = 30.0;
  SymMatrix Lambda;  // N×N price impact
  Matrix Phi;        // M×M mean reversion, ρ(I−Φ) < 1
  Matrix Pi;         // N×M loadings
  SymMatrix Sigma;   // N×N return covariance
  SymMatrix Omega;   // M×M factor innovation covariance

  /// Throws ConfigError naming the first violated condition.
  void validate() const;
};

/// Quadratic penalties on the uncontrollable blocks. Defaults are I_M for
/// the factors and 2γ⁻¹Σ⁻¹ for the returns, which make S positive definite.
struct PortfolioStars {
  std::optional<SymMatrix> star_f;
  std::optional<SymMatrix> star_r;
};

Problem portfolio_problem(const PortfolioParams& p,
                          const PortfolioStars& stars = {});

/// Witness gain [I_N 0 0] with ρ(A − BK) = ρ(I − Φ).
GainMatrix portfolio_witness_gain(const PortfolioParams& p);

struct ReturnsTable {
  std::vector<std::string> dates;
  std::vector<std::string> assets;
  Matrix returns;  // T×N

  /// Throws InputError on non-finite entries, ragged shape or T ≤ 100.
  void validate() const;
};

/// Header `date,<asset_1>,...,<asset_N>`.
ReturnsTable read_returns_csv(std::istream& is);
void write_returns_csv(const ReturnsTable& table, std::ostream& os);

/// Look-ahead moving-average factors: row k is f_t for t = 99 + k, the mean
/// of r_{t−98} .. r_{t+1}. Produces T − 100 rows.
Matrix synthetic_alphas(const Matrix& returns);

/// Sample covariance with off-diagonal correlations scaled by (1 − shrink).
SymMatrix estimate_cov_shrunk(const Matrix& returns, double shrink);

struct FactorFit {
  Matrix Phi;
  Matrix Pi;
  SymMatrix Omega;        // residual covariance of the factor equation
  SymMatrix Sigma_resid;  // residual covariance of the return equation
  bool mean_reverting = true;  // ρ(I − Φ) < 1
};

/// No-intercept least squares f_{t+1} = (I−Φ) f_t + ε, r_{t+1} = Π f_t + ε
/// over aligned rows (row t of `f` and of `r` refer to the same date).
FactorFit fit_factor_dynamics(const Matrix& f, const Matrix& r);

struct ReturnsGenerator {
  Vector vol;                       // per-asset noise volatility
  double correlation = 0.3;         // equicorrelation of the noise
  double signal_persistence = 0.98; // AR(1) coefficient of the latent signal
  double signal_strength = 0.1;     // signal loading in units of vol
};

ReturnsGenerator default_generator(Eigen::Index N);

/// r_t = D (s_{t−1} · strength + e_t), e_t ~ N(0, Corr), s an AR(1)
/// signal with unit stationary variance. Deterministic in `seed`.
ReturnsTable synthetic_returns(std::uint64_t seed, std::size_t T,
                               const ReturnsGenerator& gen);

/// Stationary covariance of the generated returns, D (Corr + strength² I) D.
SymMatrix generator_covariance(const ReturnsGenerator& gen);

/// Full data pipeline: alphas, factor fit, shrunk covariances (50%) and
/// the default γ and Λ.
PortfolioParams portfolio_params_from_returns(const ReturnsTable& table,
                                              double shrink = 0.5);

}  // namespace adp
