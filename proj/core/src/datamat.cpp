#include "adp/datamat.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "adp/errors.hpp"

namespace adp {

namespace {

constexpr Eigen::Index kChunkRows = 4096;

// Fills z (length tri(l)+1) and returns α.
double fill_z(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
              Vector& y, Eigen::Ref<Vector> z, bool rescaled) {
  const Eigen::Index n = x.size();
  y.head(n) = x;
  y.tail(u.size()) = u;
  const Eigen::Index lt = z.size() - 1;
  tilde_into(y, z.head(lt));
  z(lt) = 1.0;
  return rescaled ? z.cwiseAbs().maxCoeff() : 1.0;
}

std::vector<double> split_csv_doubles(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw InputError("data matrices snapshot: bad number '" + cell + "'");
    }
  }
  return out;
}

}  // namespace

Feature build_feature(const Eigen::Ref<const Vector>& x,
                      const Eigen::Ref<const Vector>& u,
                      const Eigen::Ref<const Vector>& X_next, double cost,
                      bool rescaled) {
  const Eigen::Index l = x.size() + u.size();
  Feature f;
  Vector y(l);
  f.z.resize(static_cast<Eigen::Index>(tri(l)) + 1);
  f.alpha = fill_z(x, u, y, f.z, rescaled);
  f.X_tilde = tilde(X_next).data;
  f.cost = cost;
  return f;
}

std::vector<Feature> build_features(const TrajectoryBatch& batch, bool rescaled) {
  std::vector<Feature> out;
  out.reserve(batch.size());
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    out.push_back(build_feature(batch.x.row(r).transpose(),
                                batch.u.row(r).transpose(),
                                batch.X_next.row(r).transpose(), batch.cost(r),
                                rescaled));
  }
  return out;
}

DataMatrices build_data_matrices(const TrajectoryBatch& batch, bool rescaled) {
  const std::size_t T = batch.size();
  if (T == 0) throw InputError("build_data_matrices: empty batch");
  const Eigen::Index n = batch.n();
  const Eigen::Index m = batch.m();
  const Eigen::Index l = n + m;
  const auto L = static_cast<Eigen::Index>(tri(l)) + 1;
  const auto nt = static_cast<Eigen::Index>(tri(n));

  Matrix theta = Matrix::Zero(L, L);
  Matrix psi = Matrix::Zero(L, nt);
  Vector xi = Vector::Zero(L);

  RowMatrix Z(kChunkRows, L);
  RowMatrix Xt(kChunkRows, nt);
  Vector c(kChunkRows);
  Vector y(l);
  Vector xt(nt);
  Vector z(L);

  const auto total = static_cast<Eigen::Index>(T);
  for (Eigen::Index start = 0; start < total; start += kChunkRows) {
    const Eigen::Index rows = std::min(kChunkRows, total - start);
    for (Eigen::Index k = 0; k < rows; ++k) {
      const Eigen::Index r = start + k;
      const double alpha = fill_z(batch.x.row(r).transpose(),
                                  batch.u.row(r).transpose(), y, z, rescaled);
      tilde_into(batch.X_next.row(r).transpose(), xt);
      const double inv = 1.0 / alpha;
      Z.row(k) = (inv * z).transpose();
      Xt.row(k) = (inv * xt).transpose();
      c(k) = inv * batch.cost(r);
    }
    const auto Zc = Z.topRows(rows);
    theta.noalias() += Zc.transpose() * Zc;
    psi.noalias() += Zc.transpose() * Xt.topRows(rows);
    xi.noalias() += Zc.transpose() * c.head(rows);
  }

  const double invT = 1.0 / static_cast<double>(T);
  DataMatrices dm;
  dm.Theta = SymMatrix(invT * theta);
  dm.Psi = invT * psi;
  dm.Xi = invT * xi;
  dm.T = T;
  dm.rescaled = rescaled;
  dm.n = n;
  dm.m = m;
  return dm;
}

DataMatrices population_moments(const LinearSystem& sys, const QuadCost& cost,
                                const std::vector<Vector>& x_support,
                                const std::vector<Vector>& u_support,
                                const std::vector<double>& weights,
                                bool rescaled) {
  sys.validate();
  cost.validate_dims(sys);
  const std::size_t K = x_support.size();
  if (K == 0 || u_support.size() != K || weights.size() != K) {
    throw DimensionError("population_moments: support sizes disagree");
  }
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  const Eigen::Index l = n + m;
  const auto L = static_cast<Eigen::Index>(tri(l)) + 1;
  const auto nt = static_cast<Eigen::Index>(tri(n));
  const Matrix noise = sys.C * sys.C.transpose();

  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InputError("population_moments: negative weight");
    wsum += w;
  }
  if (!(wsum > 0.0)) throw InputError("population_moments: zero total weight");

  Matrix theta = Matrix::Zero(L, L);
  Matrix psi = Matrix::Zero(L, nt);
  Vector xi = Vector::Zero(L);
  Vector y(l);
  Vector z(L);
  for (std::size_t k = 0; k < K; ++k) {
    const Vector& x = x_support[k];
    const Vector& u = u_support[k];
    if (x.size() != n || u.size() != m) {
      throw DimensionError("population_moments: support point dimension");
    }
    const double alpha = fill_z(x, u, y, z, rescaled);
    const Vector mean_next = sys.A * x + sys.B * u;
    const SymMatrix second(mean_next * mean_next.transpose() + noise);
    const Vector x_tilde = svec(second).data;
    const double c = x.dot(cost.S.matrix() * x) + u.dot(cost.R.matrix() * u);
    const double w = weights[k] / (wsum * alpha * alpha);
    theta.noalias() += w * z * z.transpose();
    psi.noalias() += w * z * x_tilde.transpose();
    xi.noalias() += (w * c) * z;
  }

  DataMatrices dm;
  dm.Theta = SymMatrix(theta);
  dm.Psi = psi;
  dm.Xi = xi;
  dm.T = K;
  dm.rescaled = rescaled;
  dm.n = n;
  dm.m = m;
  return dm;
}

HamiltonianEstimator::HamiltonianEstimator(const DataMatrices& dm)
    : n_(dm.n), m_(dm.m) {
  const Eigen::Index L = dm.feature_dim();
  if (L != static_cast<Eigen::Index>(tri(dm.n + dm.m)) + 1 ||
      dm.Psi.rows() != L || dm.Psi.cols() != static_cast<Eigen::Index>(tri(dm.n)) ||
      dm.Xi.size() != L) {
    throw DimensionError("HamiltonianEstimator: inconsistent data matrices");
  }
  const Matrix tp = pinv(dm.Theta.matrix());
  theta_pinv_psi_ = tp * dm.Psi;
  theta_pinv_xi_ = tp * dm.Xi;
  rank_ = numerical_rank(dm.Theta.matrix());
  full_rank_ = L;
}

HamiltonianEstimate HamiltonianEstimator::estimate(const ValueMatrix& P) const {
  if (P.dim() != n_) throw DimensionError("estimate: value matrix dimension");
  const Vector w = theta_pinv_psi_ * svec(P).data + theta_pinv_xi_;
  HamiltonianEstimate out;
  out.Q = Hamiltonian{smat(drop_last(w)), n_};
  out.mu = w(w.size() - 1);
  out.excitation_warning = rank_deficient();
  return out;
}

HamiltonianEstimate estimate_hamiltonian(const DataMatrices& dm,
                                         const ValueMatrix& P) {
  return HamiltonianEstimator(dm).estimate(P);
}

ExcitationCheck check_excitation(const DataMatrices& dm, double c_min) {
  const double e = eig_min(dm.Theta);
  return {e >= c_min, e};
}

void write_data_matrices(const DataMatrices& dm, std::ostream& os) {
  os << dm.n << ',' << dm.m << ',' << dm.T << ',' << (dm.rescaled ? 1 : 0)
     << '\n';
  os << std::setprecision(17);
  auto row = [&os](const auto& r) {
    for (Eigen::Index j = 0; j < r.size(); ++j) os << (j ? "," : "") << r(j);
    os << '\n';
  };
  for (Eigen::Index i = 0; i < dm.Theta.dim(); ++i) row(dm.Theta.matrix().row(i));
  for (Eigen::Index i = 0; i < dm.Psi.rows(); ++i) row(dm.Psi.row(i));
  row(dm.Xi);
}

DataMatrices read_data_matrices(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("data matrices snapshot: empty");
  const auto head = split_csv_doubles(line);
  if (head.size() != 4) throw InputError("data matrices snapshot: bad header");
  DataMatrices dm;
  dm.n = static_cast<Eigen::Index>(head[0]);
  dm.m = static_cast<Eigen::Index>(head[1]);
  dm.T = static_cast<std::size_t>(head[2]);
  dm.rescaled = head[3] != 0.0;
  const auto L = static_cast<Eigen::Index>(tri(dm.n + dm.m)) + 1;
  const auto nt = static_cast<Eigen::Index>(tri(dm.n));

  auto read_row = [&](Eigen::Index len) {
    if (!std::getline(is, line)) throw InputError("data matrices snapshot: truncated");
    const auto v = split_csv_doubles(line);
    if (static_cast<Eigen::Index>(v.size()) != len) {
      throw InputError("data matrices snapshot: row has " +
                       std::to_string(v.size()) + " entries, expected " +
                       std::to_string(len));
    }
    return Eigen::Map<const Vector>(v.data(), len).eval();
  };
  Matrix theta(L, L);
  for (Eigen::Index i = 0; i < L; ++i) theta.row(i) = read_row(L).transpose();
  dm.Theta = SymMatrix(theta);
  dm.Psi.resize(L, nt);
  for (Eigen::Index i = 0; i < L; ++i) dm.Psi.row(i) = read_row(nt).transpose();
  dm.Xi = read_row(L);
  return dm;
}

}  // namespace adp
