#include "adp/baselines.hpp"

#include <cmath>
#include <string>

#include "adp/errors.hpp"

namespace adp {

namespace {

// Weighted least squares: argmin Σ w_t ‖Y_t − β ᵀ X_t‖², X rows are samples.
Matrix weighted_lstsq(const Matrix& X, const Matrix& Y, const Vector& w,
                      const char* what) {
  const Vector sw = w.cwiseSqrt();
  const Matrix Xw = sw.asDiagonal() * X;
  const Matrix Yw = sw.asDiagonal() * Y;
  Eigen::ColPivHouseholderQR<Matrix> qr(Xw);
  qr.setThreshold(1e-12);
  if (qr.rank() < X.cols()) {
    throw IdentificationError(std::string(what) + ": regressor has rank " +
                              std::to_string(qr.rank()) + " < " +
                              std::to_string(X.cols()));
  }
  return qr.solve(Yw);
}

double rms(const Matrix& r) {
  return r.size() == 0 ? 0.0 : std::sqrt(r.squaredNorm() / double(r.rows()));
}

Matrix solve_or_throw(const Matrix& lhs, const Vector& rhs) {
  Eigen::ColPivHouseholderQR<Matrix> qr(lhs);
  qr.setThreshold(1e-13);
  if (qr.rank() < lhs.cols()) {
    throw SingularityError("evaluation system is rank deficient");
  }
  return qr.solve(rhs);
}

}  // namespace

LinearSystem SysIdEstimate::model() const {
  return {A_hat, B_hat, Matrix::Zero(A_hat.rows(), 1)};
}

SysIdEstimate sysid_least_squares(const TrajectoryBatch& batch, bool weighted) {
  const auto T = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index n = batch.n();
  const Eigen::Index m = batch.m();
  const Eigen::Index l = n + m;
  const auto nt = static_cast<Eigen::Index>(tri(n));
  const auto mt = static_cast<Eigen::Index>(tri(m));
  if (T < l) {
    throw IdentificationError("sysid: need at least n+m samples, got " +
                              std::to_string(T));
  }

  Matrix Y(T, l);
  Y.leftCols(n) = batch.x;
  Y.rightCols(m) = batch.u;
  Matrix F(T, nt + mt + 1);
  Vector w(T);
  Vector z(static_cast<Eigen::Index>(tri(l)) + 1);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Vector x = batch.x.row(t).transpose();
    const Vector u = batch.u.row(t).transpose();
    F.row(t).head(nt) = tilde(x).data.transpose();
    F.row(t).segment(nt, mt) = tilde(u).data.transpose();
    F(t, nt + mt) = 1.0;
    if (weighted) {
      tilde_into(Y.row(t).transpose(), z.head(z.size() - 1));
      z(z.size() - 1) = 1.0;
      const double a = z.cwiseAbs().maxCoeff();
      w(t) = 1.0 / (a * a);
    } else {
      w(t) = 1.0;
    }
  }

  const Matrix Xn = batch.X_next;
  const Matrix theta = weighted_lstsq(Y, Xn, w, "sysid dynamics");
  const Matrix AB = theta.transpose();  // n × l

  const Vector c = batch.cost;
  const Vector beta = weighted_lstsq(F, c, w, "sysid cost");

  SysIdEstimate est;
  est.A_hat = AB.leftCols(n);
  est.B_hat = AB.rightCols(m);
  est.S_hat = smat(Vector(beta.head(nt)));
  est.R_hat = smat(Vector(beta.segment(nt, mt)));
  est.mu_hat = beta(nt + mt);
  est.dynamics_residual = rms(Xn - Y * theta);
  est.cost_residual = rms(c - F * beta);
  return est;
}

SolverOutcome nominal_vi(const SysIdEstimate& est) {
  try {
    const DareSolution sol = solve_dare(est.model(), est.cost());
    SolverOutcome out;
    out.iterations = sol.iterations;
    out.gain = sol.K;
    return out;
  } catch (const Error& e) {
    return SolverOutcome::fail(std::string("nominal VI: ") + e.what());
  }
}

SolverOutcome nominal_pi(const SysIdEstimate& est, const GainMatrix& K0,
                         std::size_t max_iter, double tol) {
  const LinearSystem model = est.model();
  const QuadCost cost = est.cost();
  if (!is_stabilizing(model, K0)) {
    return SolverOutcome::fail("nominal PI: initial gain is not stabilizing");
  }
  SolverOutcome out;
  GainMatrix K = K0;
  try {
    for (std::size_t j = 0; j < max_iter; ++j) {
      const PolicyCost pc = lyapunov_policy_cost(model, cost, K);
      const GainMatrix next = induced_gain(model, cost, pc.P);
      out.trace.push_back(pc.J);
      out.iterations = j + 1;
      const double change = (next - K).norm();
      K = next;
      if (!is_stabilizing(model, K)) {
        return SolverOutcome::fail("nominal PI: improvement lost stability",
                                   out.iterations);
      }
      if (change < tol) break;
    }
  } catch (const Error& e) {
    return SolverOutcome::fail(std::string("nominal PI: ") + e.what(),
                               out.iterations);
  }
  out.gain = K;
  return out;
}

Matrix policy_value_map(const GainMatrix& K) {
  const Eigen::Index m = K.rows();
  const Eigen::Index n = K.cols();
  const Eigen::Index l = n + m;
  const auto lt = static_cast<Eigen::Index>(tri(l));
  Matrix M(l, n);
  M.topRows(n).setIdentity();
  M.bottomRows(m) = -K;
  Matrix G(static_cast<Eigen::Index>(tri(n)), lt);
  Vector e = Vector::Zero(lt);
  for (Eigen::Index k = 0; k < lt; ++k) {
    e(k) = 1.0;
    const SymMatrix basis = smat(e);
    G.col(k) = svec(SymMatrix(M.transpose() * basis.matrix() * M)).data;
    e(k) = 0.0;
  }
  return G;
}

SolverOutcome lspi(const DataMatrices& dm, const GainMatrix& K0,
                   std::size_t I_max) {
  const Eigen::Index L = dm.feature_dim();
  const Eigen::Index lt = L - 1;
  SolverOutcome out;
  GainMatrix K = K0;
  try {
    for (std::size_t j = 0; j < I_max; ++j) {
      const Matrix G = policy_value_map(K);
      Matrix lhs = dm.Theta.matrix();
      lhs.leftCols(lt) -= dm.Psi * G;
      const Vector w = solve_or_throw(lhs, dm.Xi);
      const Hamiltonian q{smat(Vector(w.head(lt))), dm.n};
      const GainMatrix next = greedy_gain(q);
      if (!next.allFinite()) {
        return SolverOutcome::fail("LSPI: non-finite gain", j + 1);
      }
      const double change = (next - K).norm();
      out.trace.push_back(change);
      out.iterations = j + 1;
      K = next;
      if (change < 1e-14) break;
    }
  } catch (const Error& e) {
    return SolverOutcome::fail(std::string("LSPI: ") + e.what(), out.iterations);
  }
  out.gain = K;
  return out;
}

SolverOutcome olspi(const DataMatrices& dm, const GainMatrix& K0,
                    const ValueMatrix& P0, std::size_t I_inner,
                    std::size_t I_outer) {
  SolverOutcome out;
  GainMatrix K = K0;
  if (I_outer == 0) {
    out.gain = K;
    return out;
  }
  try {
    const HamiltonianEstimator est(dm);
    ValueMatrix V = P0;
    for (std::size_t j = 0; j < I_outer; ++j) {
      const Eigen::Index m = K.rows();
      const Eigen::Index n = K.cols();
      Matrix M(n + m, n);
      M.topRows(n).setIdentity();
      M.bottomRows(m) = -K;
      Hamiltonian q;
      for (std::size_t k = 0; k < std::max<std::size_t>(I_inner, 1); ++k) {
        q = est.estimate(V).Q;
        V = SymMatrix(M.transpose() * q.Q.matrix() * M);
        if (!V.matrix().allFinite()) {
          return SolverOutcome::fail("O-LSPI: non-finite inner value", j + 1);
        }
      }
      const GainMatrix next = greedy_gain(q);
      out.trace.push_back((next - K).norm());
      out.iterations = j + 1;
      K = next;
    }
  } catch (const Error& e) {
    return SolverOutcome::fail(std::string("O-LSPI: ") + e.what(), out.iterations);
  }
  out.gain = K;
  return out;
}

Matrix lqr_cost_gradient(const LinearSystem& sys, const QuadCost& cost,
                         const GainMatrix& K) {
  const PolicyCost pc = lyapunov_policy_cost(sys, cost, K);
  const Matrix Acl = sys.A - sys.B * K;
  const SymMatrix sigma = solve_discrete_lyapunov(
      Acl.transpose(), SymMatrix(sys.C * sys.C.transpose()));
  const Matrix& P = pc.P.matrix();
  const Matrix E =
      (cost.R.matrix() + sys.B.transpose() * P * sys.B) * K -
      sys.B.transpose() * P * sys.A;
  return 2.0 * E * sigma.matrix();
}

SolverOutcome policy_gradient(const LinearSystem& sys, const CostSpec& cost,
                              const GainMatrix& K0,
                              const PolicyGradientOptions& opts) {
  if (!is_stabilizing(sys, K0)) {
    throw InputError("policy_gradient: initial gain is not stabilizing");
  }
  cost.validate();
  const bool exact = cost.kind == CostKind::quadratic || cost.kappa == 2.0;
  const QuadCost quad = cost.quad();

  auto objective = [&](const GainMatrix& K) {
    if (exact) return lyapunov_policy_cost(sys, quad, K).J;
    return empirical_average_cost(sys, K, cost, opts.mc_horizon, opts.mc_seed);
  };
  auto gradient = [&](const GainMatrix& K) -> Matrix {
    if (exact) return lqr_cost_gradient(sys, quad, K);
    Matrix g(K.rows(), K.cols());
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      for (Eigen::Index i = 0; i < K.rows(); ++i) {
        const double h = opts.fd_step * std::max(1.0, std::abs(K(i, j)));
        GainMatrix kp = K;
        GainMatrix km = K;
        kp(i, j) += h;
        km(i, j) -= h;
        if (!is_stabilizing(sys, kp) || !is_stabilizing(sys, km)) {
          g(i, j) = 0.0;
          continue;
        }
        g(i, j) = (objective(kp) - objective(km)) / (2.0 * h);
      }
    }
    return g;
  };

  SolverOutcome out;
  GainMatrix K = K0;
  double J = objective(K);
  out.trace.push_back(J);
  Matrix m1 = Matrix::Zero(K.rows(), K.cols());
  Matrix m2 = Matrix::Zero(K.rows(), K.cols());
  std::size_t rejected = 0;
  for (std::size_t t = 1; t <= opts.steps; ++t) {
    const Matrix g = gradient(K);
    if (!g.allFinite()) break;
    if (g.norm() <= 1e-12 * std::max(1.0, std::abs(J))) break;
    m1 = opts.beta1 * m1 + (1.0 - opts.beta1) * g;
    m2 = opts.beta2 * m2 + (1.0 - opts.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(opts.beta1, double(t));
    const double c2 = 1.0 - std::pow(opts.beta2, double(t));
    const Matrix step =
        opts.learning_rate * (m1 / c1).array() /
        ((m2 / c2).array().sqrt() + opts.epsilon);

    double scale = 1.0;
    bool accepted = false;
    for (std::size_t h = 0; h <= opts.max_halvings; ++h, scale *= 0.5) {
      const GainMatrix trial = K - scale * step;
      if (!is_stabilizing(sys, trial)) continue;
      const double Jt = objective(trial);
      if (Jt < J) {
        K = trial;
        J = Jt;
        accepted = true;
        break;
      }
    }
    // A rejected step leaves K in place; the moments keep moving toward the
    // current gradient, so a later step usually descends again.
    if (accepted) {
      rejected = 0;
    } else if (++rejected >= 10) {
      break;
    }
    out.iterations = t;
    out.trace.push_back(J);
  }
  out.gain = K;
  return out;
}

}  // namespace adp
