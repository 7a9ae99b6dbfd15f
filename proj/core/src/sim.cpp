#include "adp/sim.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>

#include "adp/errors.hpp"
#include "adp/rng.hpp"

namespace adp {

namespace {

void fill_gaussian(Engine& eng, std::normal_distribution<double>& dist,
                   Vector& out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = dist(eng);
}

double linf(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace

void BehaviorPolicy::validate() const {
  if (K_c.rows() != Sigma_eta.dim()) {
    throw DimensionError("behavior gain and exploration covariance disagree on m");
  }
  if (!(eig_min(Sigma_eta) > 0.0)) {
    throw ConfigError("exploration covariance must be positive definite");
  }
}

void CostSpec::validate() const {
  if (kind == CostKind::power && !(kappa >= 1.0 && kappa <= 3.0)) {
    throw ConfigError("cost exponent kappa = " + std::to_string(kappa) +
                      " outside [1, 3]");
  }
}

double stage_cost(const CostSpec& spec, const Eigen::Ref<const Vector>& x,
                  const Eigen::Ref<const Vector>& u) {
  const double sx = x.dot(spec.S.matrix() * x);
  if (spec.kind == CostKind::quadratic || spec.kappa == 2.0) {
    if (spec.kind == CostKind::power) spec.validate();
    return sx + u.dot(spec.R.matrix() * u);
  }
  spec.validate();
  const Vector v = u.cwiseAbs().array().pow(spec.kappa / 2.0).matrix();
  return sx + v.dot(spec.R.matrix() * v);
}

TrajectoryBatch simulate(const LinearSystem& sys, const BehaviorPolicy& policy,
                         const CostSpec& cost, const ResetConfig& reset,
                         std::size_t T) {
  sys.validate();
  cost.validate();
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  const Eigen::Index p = sys.p();
  if (T == 0) throw ConfigError("simulate: horizon T must be at least 1");
  if (policy.K_c.rows() != m || policy.K_c.cols() != n ||
      policy.Sigma_eta.dim() != m) {
    throw DimensionError("simulate: behavior policy dimensions do not match system");
  }
  if (cost.S.dim() != n || cost.R.dim() != m) {
    throw DimensionError("simulate: cost dimensions do not match system");
  }
  if (!(reset.d > 0.0)) throw ConfigError("simulate: reset bound d must be positive");

  // η = L z with L Lᵀ = Σ_η.
  const Matrix L = chol_upper(policy.Sigma_eta).transpose();

  Engine eps_eng = make_engine(reset.seed, "sim/epsilon");
  Engine eta_eng = make_engine(reset.seed, "sim/eta");
  std::normal_distribution<double> gauss;

  const auto rows = static_cast<Eigen::Index>(T);
  TrajectoryBatch b;
  b.x.resize(rows, n);
  b.u.resize(rows, m);
  b.X_next.resize(rows, n);
  b.cost.resize(rows);
  b.reset_flags.assign(T, 0);

  Vector x = Vector::Zero(n);
  Vector u(m), X(n), eps(p), zeta(m);
  for (std::size_t t = 0; t < T; ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    fill_gaussian(eta_eng, gauss, zeta);
    fill_gaussian(eps_eng, gauss, eps);
    u.noalias() = -policy.K_c * x;
    u.noalias() += L * zeta;
    X.noalias() = sys.A * x;
    X.noalias() += sys.B * u;
    X.noalias() += sys.C * eps;

    b.x.row(r) = x.transpose();
    b.u.row(r) = u.transpose();
    b.X_next.row(r) = X.transpose();
    b.cost(r) = stage_cost(cost, x, u);

    if (!X.allFinite()) {
      throw SimulationError("simulate: non-finite state", t);
    }
    if (linf(X) > reset.d) {
      b.reset_flags[t] = 1;
      x.setZero();
    } else {
      x = X;
    }
  }
  return b;
}

double empirical_average_cost(const LinearSystem& sys, const GainMatrix& K,
                              const CostSpec& cost, std::size_t T,
                              std::uint64_t seed) {
  if (!is_stabilizing(sys, K)) {
    throw StabilityError("empirical_average_cost: gain is not stabilizing");
  }
  cost.validate();
  if (T == 0) throw ConfigError("empirical_average_cost: T must be at least 1");
  Engine eng = make_engine(seed, "eval/epsilon");
  std::normal_distribution<double> gauss;
  const Matrix Acl = sys.A - sys.B * K;
  Vector x = Vector::Zero(sys.n());
  Vector u(sys.m()), next(sys.n()), eps(sys.p());
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    u.noalias() = -K * x;
    total += stage_cost(cost, x, u);
    fill_gaussian(eng, gauss, eps);
    next.noalias() = Acl * x;
    next.noalias() += sys.C * eps;
    x.swap(next);
  }
  return total / static_cast<double>(T);
}

void write_trajectory_csv(const TrajectoryBatch& batch, std::ostream& os) {
  const Eigen::Index n = batch.n();
  const Eigen::Index m = batch.m();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x_" << i;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u_" << i;
  for (Eigen::Index i = 0; i < n; ++i) os << ",Xn_" << i;
  os << ",cost,reset\n";
  os << std::setprecision(17);
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    os << t;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << batch.x(r, i);
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << batch.u(r, i);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << batch.X_next(r, i);
    os << ',' << batch.cost(r) << ',' << int(batch.reset_flags[t]) << '\n';
  }
}

}  // namespace adp
