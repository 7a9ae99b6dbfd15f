#include "adp/lqr.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "adp/errors.hpp"
#include "adp/rng.hpp"

namespace adp {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Matrix solve_uu(const Matrix& uu, const Matrix& rhs) {
  Eigen::LDLT<Matrix> ldlt(uu);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    // Fall back to a pivoted LU for indefinite but invertible blocks.
    Eigen::FullPivLU<Matrix> lu(uu);
    if (!lu.isInvertible()) throw SingularityError("uu block is singular");
    return lu.solve(rhs);
  }
  const double rc = ldlt.rcond();
  if (!(rc > 1e-14)) throw SingularityError("uu block is singular");
  return ldlt.solve(rhs);
}

}  // namespace

void LinearSystem::validate() const {
  const Eigen::Index nn = A.rows();
  if (A.cols() != nn) throw DimensionError("A must be square, got " + dims(A));
  if (B.rows() != nn) {
    throw DimensionError("B has " + std::to_string(B.rows()) +
                         " rows, expected " + std::to_string(nn));
  }
  if (C.rows() != nn) {
    throw DimensionError("C has " + std::to_string(C.rows()) +
                         " rows, expected " + std::to_string(nn));
  }
  if (!A.allFinite() || !B.allFinite() || !C.allFinite()) {
    throw InputError("system matrices contain non-finite entries");
  }
}

void QuadCost::validate_positive() const {
  if (!(eig_min(S) > 0.0)) throw ConfigError("state cost S is not positive definite");
  if (!(eig_min(R) > 0.0)) throw ConfigError("input cost R is not positive definite");
}

void QuadCost::validate_dims(const LinearSystem& sys) const {
  if (S.dim() != sys.n() || R.dim() != sys.m()) {
    throw DimensionError("cost dimensions (" + std::to_string(S.dim()) + ", " +
                         std::to_string(R.dim()) + ") do not match system (" +
                         std::to_string(sys.n()) + ", " +
                         std::to_string(sys.m()) + ")");
  }
}

Hamiltonian hamiltonian(const LinearSystem& sys, const QuadCost& cost,
                        const ValueMatrix& P) {
  cost.validate_dims(sys);
  if (P.dim() != sys.n()) throw DimensionError("value matrix dimension mismatch");
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  const Matrix PA = P.matrix() * sys.A;
  const Matrix PB = P.matrix() * sys.B;
  Matrix q(n + m, n + m);
  q.topLeftCorner(n, n) = sys.A.transpose() * PA + cost.S.matrix();
  q.bottomLeftCorner(m, n) = sys.B.transpose() * PA;
  q.topRightCorner(n, m) = q.bottomLeftCorner(m, n).transpose();
  q.bottomRightCorner(m, m) = sys.B.transpose() * PB + cost.R.matrix();
  return {SymMatrix(q), n};
}

GainMatrix greedy_gain(const Hamiltonian& q) { return solve_uu(q.uu(), q.ux()); }

GainMatrix greedy_gain_pinv(const Hamiltonian& q) { return pinv(q.uu()) * q.ux(); }

GainMatrix induced_gain(const LinearSystem& sys, const QuadCost& cost,
                        const ValueMatrix& P) {
  return greedy_gain(hamiltonian(sys, cost, P));
}

ValueMatrix riccati_op(const LinearSystem& sys, const QuadCost& cost,
                       const ValueMatrix& P,
                       const std::optional<SymMatrix>& s_override) {
  const QuadCost c = s_override ? QuadCost{*s_override, cost.R} : cost;
  const Hamiltonian q = hamiltonian(sys, c, P);
  const Matrix qux = q.ux();
  return SymMatrix(q.xx() - qux.transpose() * solve_uu(q.uu(), qux));
}

ViResult exact_vi(const LinearSystem& sys, const QuadCost& cost,
                  const ValueMatrix& P0, const ViOptions& opts) {
  ViResult res;
  res.P = P0;
  if (opts.keep_iterates) res.iterates.push_back(P0);
  for (std::size_t i = 0; i < opts.max_iter; ++i) {
    ValueMatrix next = riccati_op(sys, cost, res.P);
    if (!next.matrix().allFinite()) {
      throw NumericalError("exact_vi: non-finite iterate", i + 1);
    }
    const double step = norm2(next.matrix() - res.P.matrix());
    const double scale = std::max(1.0, norm2(res.P.matrix()));
    res.step_norms.push_back(step);
    res.P = std::move(next);
    res.iterations = i + 1;
    if (opts.keep_iterates) res.iterates.push_back(res.P);
    if (step < opts.tol * scale) {
      res.converged = true;
      break;
    }
  }
  return res;
}

std::vector<ValueMatrix> inexact_vi(const LinearSystem& sys,
                                    const QuadCost& cost, const ValueMatrix& P0,
                                    const DisturbanceSource& disturbance,
                                    std::size_t max_iter) {
  std::vector<ValueMatrix> trace;
  trace.reserve(max_iter + 1);
  trace.push_back(P0);
  for (std::size_t i = 0; i < max_iter; ++i) {
    const Matrix delta = disturbance(i);
    if (delta.rows() != sys.n() || delta.cols() != sys.n()) {
      throw DimensionError("inexact_vi: disturbance has shape " + dims(delta));
    }
    if (delta.hasNaN()) {
      throw InputError("inexact_vi: disturbance " + std::to_string(i) +
                       " contains NaN");
    }
    trace.push_back(
        SymMatrix(riccati_op(sys, cost, trace.back()).matrix() + delta));
  }
  return trace;
}

DisturbanceSource zero_disturbance(Eigen::Index n) {
  return [n](std::size_t) { return Matrix::Zero(n, n).eval(); };
}

DisturbanceSource random_disturbance(Eigen::Index n, double magnitude,
                                     std::uint64_t seed) {
  auto engine = std::make_shared<Engine>(make_engine(seed, "disturbance"));
  return [n, magnitude, engine](std::size_t) {
    std::normal_distribution<double> gauss;
    Matrix g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) g(i, j) = gauss(*engine);
    }
    const Matrix sym = 0.5 * (g + g.transpose());
    const double nrm = norm2(sym);
    if (magnitude == 0.0 || nrm == 0.0) return Matrix::Zero(n, n).eval();
    return (magnitude / nrm * sym).eval();
  };
}

SymMatrix solve_discrete_lyapunov(const Matrix& F, const SymMatrix& W) {
  const Eigen::Index n = F.rows();
  if (F.cols() != n || W.dim() != n) {
    throw DimensionError("solve_discrete_lyapunov: shape mismatch");
  }
  const Matrix Ft = F.transpose();
  const Matrix lhs = Matrix::Identity(n * n, n * n) - kron(Ft, Ft);
  Eigen::PartialPivLU<Matrix> lu(lhs);
  const Vector x = lu.solve(vec(W.matrix()));
  return SymMatrix(unvec(x, n, n));
}

PolicyCost lyapunov_policy_cost(const LinearSystem& sys, const QuadCost& cost,
                                const GainMatrix& K) {
  cost.validate_dims(sys);
  if (K.rows() != sys.m() || K.cols() != sys.n()) {
    throw DimensionError("gain has shape " + dims(K));
  }
  if (!is_stabilizing(sys, K)) {
    throw StabilityError("lyapunov_policy_cost: gain is not stabilizing");
  }
  const Matrix Acl = sys.A - sys.B * K;
  const SymMatrix W(cost.S.matrix() + K.transpose() * cost.R.matrix() * K);
  PolicyCost out;
  out.P = solve_discrete_lyapunov(Acl, W);
  out.J = (sys.C.transpose() * out.P.matrix() * sys.C).trace();
  return out;
}

bool is_stabilizing(const LinearSystem& sys, const GainMatrix& K) {
  if (K.rows() != sys.m() || K.cols() != sys.n()) {
    throw DimensionError("gain has shape " + dims(K));
  }
  if (!K.allFinite()) return false;
  return spectral_radius(sys.A - sys.B * K) < 1.0 - 1e-12;
}

DareSolution solve_dare(const LinearSystem& sys, const QuadCost& cost,
                        double tol) {
  sys.validate();
  cost.validate_dims(sys);
  cost.validate_positive();

  ViOptions opts;
  opts.tol = std::max(tol, 1e-10);
  opts.max_iter = 10000;
  ViResult vi = exact_vi(sys, cost, SymMatrix::zero(sys.n()), opts);

  DareSolution sol;
  sol.iterations = vi.iterations;
  ValueMatrix P = vi.P;
  GainMatrix K = induced_gain(sys, cost, P);
  if (!is_stabilizing(sys, K)) {
    throw Error("solve_dare: value iteration did not reach a stabilizing gain");
  }
  // Hewer refinement converges quadratically from a stabilizing gain.
  for (int j = 0; j < 100; ++j) {
    const ValueMatrix next = lyapunov_policy_cost(sys, cost, K).P;
    const double step = norm2(next.matrix() - P.matrix());
    P = next;
    K = induced_gain(sys, cost, P);
    ++sol.iterations;
    if (step < tol * std::max(1.0, norm2(P.matrix()))) break;
  }
  const double residual = norm2(P.matrix() - riccati_op(sys, cost, P).matrix());
  if (!(residual <= 1e-9 * std::max(1.0, norm2(P.matrix())))) {
    throw Error("solve_dare: residual " + std::to_string(residual) +
                " above tolerance");
  }
  sol.P = P;
  sol.K = K;
  sol.J = (sys.C.transpose() * P.matrix() * sys.C).trace();
  return sol;
}

}  // namespace adp
