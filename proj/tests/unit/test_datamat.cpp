#include <cmath>
#include <sstream>

#include "doctest.h"

#include "adp/bench.hpp"
#include "adp/datamat.hpp"
#include "adp/errors.hpp"
#include "oracles.hpp"

using namespace adp;

namespace {

// Hand-written features for n = m = 1: z = [x², √2xu, u², 1].
Vector z11(double x, double u) {
  return (Vector(4) << x * x, std::sqrt(2.0) * x * u, u * u, 1.0).finished();
}

TrajectoryBatch prefix(const TrajectoryBatch& b, Eigen::Index T) {
  TrajectoryBatch p;
  p.x = b.x.topRows(T);
  p.u = b.u.topRows(T);
  p.X_next = b.X_next.topRows(T);
  p.cost = b.cost.head(T);
  p.reset_flags.assign(b.reset_flags.begin(), b.reset_flags.begin() + T);
  return p;
}

struct Support {
  LinearSystem sys;
  QuadCost cost;
  std::vector<Vector> xs;
  std::vector<Vector> us;
  std::vector<double> w;
};

Support random_support(oracle::Rng& rng, Eigen::Index n, Eigen::Index m, int points,
                       bool noisy) {
  Support s;
  s.sys = {rng.matrix(n, n) * 0.5, rng.matrix(n, m), noisy ? rng.matrix(n, n) : Matrix::Zero(n, n)};
  s.cost = {SymMatrix(rng.spd(n)), SymMatrix(rng.spd(m))};
  for (int k = 0; k < points; ++k) {
    s.xs.push_back(rng.vector(n));
    s.us.push_back(rng.vector(m));
    s.w.push_back(rng.uniform(0.5, 1.5));
  }
  return s;
}

}  // namespace

TEST_SUITE("datamat") {

TEST_CASE("features") {
  const Feature f0 = build_feature(Vector::Zero(1), Vector::Zero(1), Vector::Zero(1), 0.0, true);
  CHECK(f0.z == (Vector(4) << 0, 0, 0, 1).finished());
  CHECK(f0.alpha == 1.0);

  const Feature f = build_feature(Vector::Constant(1, 1.0), Vector::Constant(1, 2.0),
                                  Vector::Constant(1, 3.0), 5.0, true);
  CHECK((f.z - z11(1, 2)).norm() < 1e-15);
  CHECK(f.alpha == 4.0);
  CHECK(f.X_tilde(0) == 9.0);
  CHECK(f.cost == 5.0);

  const Feature g = build_feature(Vector::Constant(1, 1.0), Vector::Constant(1, 2.0),
                                  Vector::Constant(1, 3.0), 5.0, false);
  CHECK(g.z == f.z);
  CHECK(g.alpha == 1.0);

  oracle::Rng rng(31);
  for (int k = 0; k < 50; ++k) {
    const Feature h = build_feature(rng.vector(3), rng.vector(2), rng.vector(3), 1.0, true);
    CHECK(h.z.size() == 16);
    CHECK(h.z(15) == 1.0);
    CHECK(h.alpha >= 1.0);
    CHECK(h.alpha == h.z.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("two-sample averages by hand") {
  TrajectoryBatch b;
  b.x = RowMatrix((RowMatrix(2, 1) << 1.0, -0.5).finished());
  b.u = RowMatrix((RowMatrix(2, 1) << 2.0, 3.0).finished());
  b.X_next = RowMatrix((RowMatrix(2, 1) << 0.7, -1.2).finished());
  b.cost = (Vector(2) << 4.0, 1.5).finished();
  b.reset_flags = {0, 0};
  for (bool rescaled : {true, false}) {
    const DataMatrices dm = build_data_matrices(b, rescaled);
    Matrix theta = Matrix::Zero(4, 4);
    Matrix psi = Matrix::Zero(4, 1);
    Vector xi = Vector::Zero(4);
    for (int t = 0; t < 2; ++t) {
      const Vector z = z11(b.x(t, 0), b.u(t, 0));
      const double a = rescaled ? z.cwiseAbs().maxCoeff() : 1.0;
      theta += 0.5 * z * z.transpose() / (a * a);
      psi += 0.5 * z * (b.X_next(t, 0) * b.X_next(t, 0)) / (a * a);
      xi += 0.5 * z * b.cost(t) / (a * a);
    }
    CHECK((dm.Theta.matrix() - theta).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((dm.Psi - psi).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((dm.Xi - xi).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(dm.T == 2);
  }
}

TEST_CASE("identical samples average to themselves") {
  TrajectoryBatch b;
  b.x = RowMatrix::Constant(7, 2, 0.3);
  b.u = RowMatrix::Constant(7, 1, -2.0);
  b.X_next = RowMatrix::Constant(7, 2, 1.1);
  b.cost = Vector::Constant(7, 2.5);
  b.reset_flags.assign(7, 0);
  const Feature f = build_feature(b.x.row(0).transpose(), b.u.row(0).transpose(),
                                  b.X_next.row(0).transpose(), 2.5, true);
  const DataMatrices dm = build_data_matrices(b, true);
  const double a2 = f.alpha * f.alpha;
  CHECK((dm.Theta.matrix() - f.z * f.z.transpose() / a2).norm() < 1e-14);
  CHECK((dm.Psi - f.z * f.X_tilde.transpose() / a2).norm() < 1e-14);
  CHECK((dm.Xi - f.z * 2.5 / a2).norm() < 1e-14);
  CHECK_FALSE(check_excitation(dm, 1e-12).ok);
}

TEST_CASE("empty batches are rejected") {
  TrajectoryBatch b;
  b.x = RowMatrix(0, 1);
  b.u = RowMatrix(0, 1);
  b.X_next = RowMatrix(0, 1);
  CHECK_THROWS_AS(build_data_matrices(b, true), InputError);
}

TEST_CASE("rescaled moments are bounded and PSD") {
  const Problem dc = datacenter_problem();
  const BehaviorPolicy pol{-0.05 * Matrix::Identity(3, 3), SymMatrix::identity(3)};
  const TrajectoryBatch b = simulate(dc.sys, pol, CostSpec::quadratic(dc.cost), {1000.0, 3}, 20000);
  const DataMatrices dm = build_data_matrices(b, true);
  CHECK(dm.Theta.matrix().cwiseAbs().maxCoeff() <= 1.0);
  CHECK(eig_min(dm.Theta) >= -1e-12);
  CHECK(dm.feature_dim() == 22);
  CHECK(dm.Psi.cols() == 6);
}

TEST_CASE("data matrices settle as T grows") {
  const Problem dc = datacenter_problem();
  const BehaviorPolicy pol{-0.05 * Matrix::Identity(3, 3), SymMatrix::identity(3)};
  const TrajectoryBatch b =
      simulate(dc.sys, pol, CostSpec::quadratic(dc.cost), {1000.0, 11}, 200000);
  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index T : {1000, 10000, 100000}) {
    const DataMatrices a = build_data_matrices(prefix(b, T), true);
    const DataMatrices c = build_data_matrices(prefix(b, 2 * T), true);
    const double gap = norm2(a.Theta.matrix() - c.Theta.matrix());
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("exact moments give the exact Hamiltonian") {
  oracle::Rng rng(32);
  for (int k = 0; k < 10; ++k) {
    const Support s = random_support(rng, 2, 1, 40, true);
    for (bool rescaled : {true, false}) {
      const DataMatrices dm = population_moments(s.sys, s.cost, s.xs, s.us, s.w, rescaled);
      const SymMatrix P(rng.spd(2));
      const HamiltonianEstimate e = estimate_hamiltonian(dm, P);
      const Hamiltonian q = hamiltonian(s.sys, s.cost, P);
      CHECK((e.Q.Q.matrix() - q.Q.matrix()).cwiseAbs().maxCoeff() <= 1e-10 * (1 + q.Q.matrix().norm()));
      const double mu = (s.sys.C.transpose() * P.matrix() * s.sys.C).trace();
      CHECK(e.mu == doctest::Approx(mu).epsilon(1e-9));
      CHECK_FALSE(e.excitation_warning);
    }
  }
}

TEST_CASE("the estimate is affine in P") {
  const Problem dc = datacenter_problem();
  const BehaviorPolicy pol{-0.05 * Matrix::Identity(3, 3), SymMatrix::identity(3)};
  const DataMatrices dm = build_data_matrices(
      simulate(dc.sys, pol, CostSpec::quadratic(dc.cost), {1000.0, 4}, 20000), true);
  const HamiltonianEstimator est(dm);
  oracle::Rng rng(33);
  for (int k = 0; k < 20; ++k) {
    const SymMatrix P1(rng.spd(3));
    const SymMatrix P2(rng.spd(3));
    const double a = rng.uniform(-2, 2);
    const double b = rng.uniform(-2, 2);
    const Matrix lhs = est.estimate(a * P1 + b * P2).Q.Q.matrix();
    const Matrix rhs = a * est.estimate(P1).Q.Q.matrix() + b * est.estimate(P2).Q.Q.matrix() +
                       (1 - a - b) * est.estimate(SymMatrix::zero(3)).Q.Q.matrix();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10 * (1 + lhs.cwiseAbs().maxCoeff()));
  }
  // The cached estimator and the one-shot wrapper agree.
  const SymMatrix P(rng.spd(3));
  CHECK((est.estimate(P).Q.Q.matrix() - estimate_hamiltonian(dm, P).Q.Q.matrix()).norm() < 1e-12);
}

TEST_CASE("temporal-difference identity on a noise-free plant") {
  const Problem dc = datacenter_problem();
  LinearSystem quiet = dc.sys;
  quiet.C.setZero();
  const BehaviorPolicy pol{0.1 * Matrix::Identity(3, 3), SymMatrix::identity(3)};
  const TrajectoryBatch b = simulate(quiet, pol, CostSpec::quadratic(dc.cost), {1000.0, 5}, 500);
  oracle::Rng rng(34);
  for (int k = 0; k < 5; ++k) {
    const SymMatrix P(rng.spd(3));
    const Vector q = svec(hamiltonian(quiet, dc.cost, P).Q).data;
    const Vector p = svec(P).data;
    for (Eigen::Index t = 0; t < b.x.rows(); ++t) {
      Vector y(6);
      y << b.x.row(t).transpose(), b.u.row(t).transpose();
      const double lhs = tilde(b.X_next.row(t).transpose()).data.dot(p) + b.cost(t);
      const double rhs = tilde(y).data.dot(q);
      CHECK(std::abs(lhs - rhs) <= 1e-10 * (1 + std::abs(lhs)));
    }
  }
}

TEST_CASE("regressing costs recovers Q(0)") {
  const Problem dc = datacenter_problem();
  LinearSystem quiet = dc.sys;
  quiet.C.setZero();
  const BehaviorPolicy pol{0.1 * Matrix::Identity(3, 3), SymMatrix::identity(3)};
  const DataMatrices dm = build_data_matrices(
      simulate(quiet, pol, CostSpec::quadratic(dc.cost), {1000.0, 6}, 5000), true);
  const HamiltonianEstimate e = estimate_hamiltonian(dm, SymMatrix::zero(3));
  const Matrix q0 = hamiltonian(quiet, dc.cost, SymMatrix::zero(3)).Q.matrix();
  CHECK((e.Q.Q.matrix() - q0).cwiseAbs().maxCoeff() <= 1e-8 * q0.cwiseAbs().maxCoeff());
  CHECK(std::abs(e.mu) <= 1e-8);
}

TEST_CASE("rescaling leaves the population solution unchanged") {
  oracle::Rng rng(35);
  const Support s = random_support(rng, 2, 2, 80, false);
  const SymMatrix P(rng.spd(2));
  const DataMatrices a = population_moments(s.sys, s.cost, s.xs, s.us, s.w, true);
  const DataMatrices b = population_moments(s.sys, s.cost, s.xs, s.us, s.w, false);
  const Matrix qa = estimate_hamiltonian(a, P).Q.Q.matrix();
  const Matrix qb = estimate_hamiltonian(b, P).Q.Q.matrix();
  CHECK((qa - qb).cwiseAbs().maxCoeff() <= 1e-8 * (1 + qa.cwiseAbs().maxCoeff()));
}

TEST_CASE("noise intercept at the optimum") {
  const Problem dc = datacenter_problem();
  const DareSolution opt = solve_dare(dc.sys, dc.cost);
  const BehaviorPolicy pol{-0.05 * Matrix::Identity(3, 3), SymMatrix::identity(3)};
  const DataMatrices dm = build_data_matrices(
      simulate(dc.sys, pol, CostSpec::quadratic(dc.cost), {1000.0, 7}, 100000), true);
  const HamiltonianEstimate e = estimate_hamiltonian(dm, opt.P);
  CHECK(std::abs(e.mu - opt.J) <= 0.1 * opt.J);

  const ExcitationCheck ex = check_excitation(dm, 1e-6);
  CHECK(ex.ok);
  CHECK(ex.eig_min == doctest::Approx(eig_min(dm.Theta)));
}

TEST_CASE("excitation failures") {
  const Problem dc = datacenter_problem();
  LinearSystem quiet = dc.sys;
  quiet.C.setZero();
  const BehaviorPolicy none{Matrix::Zero(3, 3), SymMatrix::zero(3)};
  const DataMatrices dm = build_data_matrices(
      simulate(quiet, none, CostSpec::quadratic(dc.cost), {1000.0, 1}, 100), true);
  const ExcitationCheck ex = check_excitation(dm, 1e-12);
  CHECK_FALSE(ex.ok);
  CHECK(ex.eig_min == doctest::Approx(0.0));
  CHECK(estimate_hamiltonian(dm, SymMatrix::zero(3)).excitation_warning);
  CHECK(HamiltonianEstimator(dm).theta_rank() == 1);

  const DataMatrices one = build_data_matrices(
      prefix(simulate(dc.sys, none, CostSpec::quadratic(dc.cost), {1000.0, 1}, 10), 1), true);
  CHECK_FALSE(check_excitation(one, 1e-12).ok);
}

TEST_CASE("snapshot round trip") {
  const Problem dc = datacenter_problem();
  const BehaviorPolicy pol{-0.05 * Matrix::Identity(3, 3), SymMatrix::identity(3)};
  const DataMatrices dm = build_data_matrices(
      simulate(dc.sys, pol, CostSpec::quadratic(dc.cost), {1000.0, 8}, 3000), false);
  std::stringstream ss;
  write_data_matrices(dm, ss);
  const DataMatrices back = read_data_matrices(ss);
  CHECK(back.Theta.matrix() == dm.Theta.matrix());
  CHECK(back.Psi == dm.Psi);
  CHECK(back.Xi == dm.Xi);
  CHECK(back.T == dm.T);
  CHECK(back.rescaled == dm.rescaled);
  CHECK(back.n == 3);
  CHECK(back.m == 3);

  std::stringstream bad("not,a,header\n");
  CHECK_THROWS(read_data_matrices(bad));
}

}  // TEST_SUITE
