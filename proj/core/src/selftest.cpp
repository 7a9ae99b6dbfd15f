#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <string>

#include "adp/baselines.hpp"
#include "adp/bench.hpp"
#include "adp/errors.hpp"
#include "adp/experiments.hpp"
#include "adp/rng.hpp"

namespace adp {

namespace {

SymMatrix random_sym(Engine& eng, Eigen::Index n) {
  std::normal_distribution<double> nd;
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(eng);
  return SymMatrix(m + m.transpose());
}

}  // namespace

int run_selftest(std::ostream& os) {
  int failures = 0;
  auto check = [&](const std::string& name, const std::function<bool()>& body) {
    bool ok = false;
    std::string note;
    try {
      ok = body();
    } catch (const std::exception& e) {
      note = std::string(" (") + e.what() + ")";
    }
    os << (ok ? "PASS " : "FAIL ") << name << note << '\n';
    if (!ok) ++failures;
  };

  Engine eng = make_engine(20240101, "selftest");
  const Problem dc = datacenter_problem();

  check("svec is an isometry", [&] {
    for (int k = 0; k < 20; ++k) {
      const SymMatrix a = random_sym(eng, 4);
      const SymMatrix b = random_sym(eng, 4);
      const double lhs = (a.matrix().array() * b.matrix().array()).sum();
      if (std::abs(lhs - svec(a).data.dot(svec(b).data)) > 1e-10 * (1 + std::abs(lhs))) {
        return false;
      }
      if ((smat(svec(a)).matrix() - a.matrix()).norm() > 1e-12) return false;
    }
    return true;
  });

  check("DARE residual on the data-center problem", [&] {
    const DareSolution s = solve_dare(dc.sys, dc.cost);
    const SymMatrix r = riccati_op(dc.sys, dc.cost, s.P);
    return norm2(r.matrix() - s.P.matrix()) <= 1e-9 * norm2(s.P.matrix());
  });

  check("Lyapunov cost of K* matches tr(C'P*C)", [&] {
    const DareSolution s = solve_dare(dc.sys, dc.cost);
    const PolicyCost pc = lyapunov_policy_cost(dc.sys, dc.cost, s.K);
    return std::abs(pc.J - s.J) <= 1e-8 * s.J;
  });

  check("exact-moment R-LSVI follows exact VI", [&] {
    std::vector<Vector> xs;
    std::vector<Vector> us;
    std::vector<double> w;
    std::normal_distribution<double> nd;
    for (int k = 0; k < 60; ++k) {
      Vector x(3);
      Vector u(3);
      for (int i = 0; i < 3; ++i) {
        x(i) = nd(eng);
        u(i) = nd(eng);
      }
      xs.push_back(x);
      us.push_back(u);
      w.push_back(1.0);
    }
    const DataMatrices dm = population_moments(dc.sys, dc.cost, xs, us, w, true);
    const SymMatrix P0 = SymMatrix::scaled_identity(3, 0.5);
    const RlsviResult r = rlsvi_iterate(dm, P0, 30);
    ViOptions o;
    o.max_iter = 30;
    o.tol = 0.0;
    o.keep_iterates = true;
    const ViResult vi = exact_vi(dc.sys, dc.cost, P0, o);
    for (std::size_t i = 0; i < vi.iterates.size(); ++i) {
      const double scale = std::max(1.0, norm2(vi.iterates[i].matrix()));
      if (norm2(r.P_trace[i].matrix() - vi.iterates[i].matrix()) > 1e-9 * scale) {
        return false;
      }
    }
    return true;
  });

  check("portfolio cost matrix is positive definite", [&] {
    const PortfolioParams p = portfolio_params_from_returns(
        synthetic_returns(3, 2000, default_generator(3)));
    return eig_min(portfolio_problem(p).cost.S) > 0.0;
  });

  check("simulation is deterministic per seed", [&] {
    const BehaviorPolicy b{-0.05 * Matrix::Identity(3, 3), SymMatrix::identity(3)};
    const CostSpec c = CostSpec::quadratic(dc.cost);
    return simulate(dc.sys, b, c, {1000.0, 9}, 500) ==
           simulate(dc.sys, b, c, {1000.0, 9}, 500);
  });

  check("analytic policy gradient matches finite differences", [&] {
    const GainMatrix K = 0.3 * Matrix::Identity(3, 3);
    const Matrix g = lqr_cost_gradient(dc.sys, dc.cost, K);
    const double h = 1e-6;
    Matrix fd(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        GainMatrix kp = K;
        GainMatrix km = K;
        kp(i, j) += h;
        km(i, j) -= h;
        fd(i, j) = (lyapunov_policy_cost(dc.sys, dc.cost, kp).J -
                    lyapunov_policy_cost(dc.sys, dc.cost, km).J) /
                   (2 * h);
      }
    }
    return (g - fd).norm() <= 1e-5 * g.norm();
  });

  os << (failures == 0 ? "selftest passed" : "selftest FAILED: " +
                                                 std::to_string(failures) +
                                                 " check(s)")
     << '\n';
  return failures;
}

}  // namespace adp
