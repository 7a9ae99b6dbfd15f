#include "adp/bench.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <iomanip>
#include <random>
#include <sstream>

#include "adp/errors.hpp"
#include "adp/rng.hpp"

namespace adp {

namespace {

SymMatrix shrink_correlations(const SymMatrix& cov, double shrink) {
  const Vector sd = cov.matrix().diagonal().cwiseSqrt();
  // Constant columns leave rounding residue, so zero is judged relative to
  // the widest column.
  const double floor = 1e-10 * sd.maxCoeff();
  for (Eigen::Index i = 0; i < sd.size(); ++i) {
    if (!(sd(i) > floor)) {
      throw InputError("covariance: column " + std::to_string(i) +
                       " has zero variance");
    }
  }
  Matrix corr = sd.cwiseInverse().asDiagonal() * cov.matrix() *
                sd.cwiseInverse().asDiagonal();
  corr *= (1.0 - shrink);
  corr.diagonal().setOnes();
  return SymMatrix(sd.asDiagonal() * corr * sd.asDiagonal());
}

SymMatrix sample_covariance(const Matrix& x) {
  if (x.rows() < 2) throw InputError("covariance: need at least 2 rows");
  const Matrix c = x.rowwise() - x.colwise().mean();
  return SymMatrix(c.transpose() * c / double(x.rows() - 1));
}

SymMatrix residual_covariance(const Matrix& resid) {
  return SymMatrix(resid.transpose() * resid / double(resid.rows()));
}

Matrix lstsq_no_intercept(const Matrix& X, const Matrix& Y, const char* what) {
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < X.cols()) {
    throw IdentificationError(std::string(what) + ": regressor rank deficient");
  }
  return qr.solve(Y);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Problem datacenter_problem() {
  Matrix A(3, 3);
  A << 1.01, 0.01, 0.0,
       0.01, 1.01, 0.01,
       0.0, 0.01, 1.01;
  Problem p;
  p.sys = {A, Matrix::Identity(3, 3), Matrix::Identity(3, 3)};
  p.cost = {SymMatrix::identity(3), SymMatrix::scaled_identity(3, 1000.0)};
  return p;
}

void PortfolioParams::validate() const {
  if (N < 1 || M < 1) throw ConfigError("portfolio: N and M must be positive");
  if (!(gamma > 0.0)) throw ConfigError("portfolio: gamma must be positive");
  if (Lambda.dim() != N || Sigma.dim() != N || Omega.dim() != M ||
      Phi.rows() != M || Phi.cols() != M || Pi.rows() != N || Pi.cols() != M) {
    throw ConfigError("portfolio: parameter dimensions disagree with N, M");
  }
  if (!(eig_min(Lambda) > 0.0)) throw ConfigError("portfolio: Lambda not positive definite");
  if (!(eig_min(Sigma) > 0.0)) throw ConfigError("portfolio: Sigma not positive definite");
  if (!(eig_min(Omega) > 0.0)) throw ConfigError("portfolio: Omega not positive definite");
  const double rho = spectral_radius(Matrix::Identity(M, M) - Phi);
  if (!(rho < 1.0)) {
    throw ConfigError("portfolio: rho(I - Phi) = " + std::to_string(rho) +
                      " is not below 1");
  }
}

Problem portfolio_problem(const PortfolioParams& p, const PortfolioStars& stars) {
  p.validate();
  const Eigen::Index N = p.N;
  const Eigen::Index M = p.M;
  const Eigen::Index n = 2 * N + M;

  Matrix A = Matrix::Zero(n, n);
  A.topLeftCorner(N, N).setIdentity();
  A.block(N, N, M, M) = Matrix::Identity(M, M) - p.Phi;
  A.block(N + M, N, N, M) = p.Pi;

  Matrix B = Matrix::Zero(n, N);
  B.topRows(N).setIdentity();

  // Lower factors so that the noise covariances are exactly Ω and Σ.
  Matrix C = Matrix::Zero(n, M + N);
  C.block(N, 0, M, M) = chol_upper(p.Omega).transpose();
  C.block(N + M, M, N, N) = chol_upper(p.Sigma).transpose();

  const SymMatrix star_f = stars.star_f.value_or(SymMatrix::identity(M));
  const SymMatrix star_r = stars.star_r.value_or(
      SymMatrix((2.0 / p.gamma) * p.Sigma.matrix().inverse()));
  if (star_f.dim() != M || star_r.dim() != N) {
    throw ConfigError("portfolio: star block dimensions");
  }

  Matrix S = Matrix::Zero(n, n);
  S.topLeftCorner(N, N) = p.gamma * p.Sigma.matrix();
  S.block(0, N + M, N, N) = -Matrix::Identity(N, N);
  S.block(N + M, 0, N, N) = -Matrix::Identity(N, N);
  S.block(N, N, M, M) = star_f.matrix();
  S.block(N + M, N + M, N, N) = star_r.matrix();

  Problem out;
  out.sys = {A, B, C};
  out.cost = {SymMatrix(S), p.Lambda};
  return out;
}

GainMatrix portfolio_witness_gain(const PortfolioParams& p) {
  GainMatrix K = Matrix::Zero(p.N, 2 * p.N + p.M);
  K.leftCols(p.N).setIdentity();
  return K;
}

void ReturnsTable::validate() const {
  if (returns.rows() <= 100) {
    throw InputError("returns: need more than 100 periods, got " +
                     std::to_string(returns.rows()));
  }
  if (static_cast<Eigen::Index>(dates.size()) != returns.rows() ||
      static_cast<Eigen::Index>(assets.size()) != returns.cols()) {
    throw InputError("returns: labels disagree with the data shape");
  }
  if (!returns.allFinite()) throw InputError("returns: non-finite entry");
}

ReturnsTable read_returns_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("returns csv: empty input");
  auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "date") {
    throw InputError("returns csv: header must start with 'date'");
  }
  ReturnsTable t;
  t.assets.assign(header.begin() + 1, header.end());
  const std::size_t N = t.assets.size();
  std::vector<double> values;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != N + 1) {
      throw InputError("returns csv: line " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(N + 1));
    }
    t.dates.push_back(cells[0]);
    for (std::size_t j = 1; j <= N; ++j) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[j].size()) {
        throw InputError("returns csv: line " + std::to_string(row) +
                         " has a missing or malformed cell");
      }
      values.push_back(v);
    }
  }
  t.returns = Eigen::Map<const RowMatrix>(
      values.data(), static_cast<Eigen::Index>(t.dates.size()),
      static_cast<Eigen::Index>(N));
  t.validate();
  return t;
}

void write_returns_csv(const ReturnsTable& table, std::ostream& os) {
  os << "date";
  for (const auto& a : table.assets) os << ',' << a;
  os << '\n' << std::setprecision(17);
  for (Eigen::Index t = 0; t < table.returns.rows(); ++t) {
    os << table.dates[static_cast<std::size_t>(t)];
    for (Eigen::Index j = 0; j < table.returns.cols(); ++j) {
      os << ',' << table.returns(t, j);
    }
    os << '\n';
  }
}

Matrix synthetic_alphas(const Matrix& returns) {
  const Eigen::Index T = returns.rows();
  if (T <= 100) {
    throw InputError("synthetic_alphas: need more than 100 periods");
  }
  Matrix f(T - 100, returns.cols());
  // Rolling sum over r_{t-98} .. r_{t+1}.
  Vector window = returns.middleRows(1, 100).colwise().sum().transpose();
  for (Eigen::Index t = 99; t <= T - 2; ++t) {
    if (t > 99) {
      window += returns.row(t + 1).transpose() - returns.row(t - 99).transpose();
    }
    f.row(t - 99) = window.transpose() / 100.0;
  }
  return f;
}

SymMatrix estimate_cov_shrunk(const Matrix& returns, double shrink) {
  if (!(shrink >= 0.0 && shrink <= 1.0)) {
    throw InputError("estimate_cov_shrunk: shrink must lie in [0, 1]");
  }
  return shrink_correlations(sample_covariance(returns), shrink);
}

FactorFit fit_factor_dynamics(const Matrix& f, const Matrix& r) {
  if (f.rows() != r.rows()) {
    throw DimensionError("fit_factor_dynamics: tables are not aligned");
  }
  if (f.rows() < f.cols() + 2) {
    throw IdentificationError("fit_factor_dynamics: too few rows");
  }
  const Eigen::Index K = f.rows() - 1;
  const Eigen::Index M = f.cols();
  const Matrix X = f.topRows(K);
  const Matrix Fn = f.bottomRows(K);
  const Matrix Rn = r.bottomRows(K);

  const Matrix bf = lstsq_no_intercept(X, Fn, "factor equation");  // (I−Φ)ᵀ
  const Matrix br = lstsq_no_intercept(X, Rn, "return equation");  // Πᵀ

  FactorFit fit;
  fit.Phi = Matrix::Identity(M, M) - bf.transpose();
  fit.Pi = br.transpose();
  fit.Omega = residual_covariance(Fn - X * bf);
  fit.Sigma_resid = residual_covariance(Rn - X * br);
  fit.mean_reverting = spectral_radius(bf.transpose()) < 1.0;
  return fit;
}

ReturnsGenerator default_generator(Eigen::Index N) {
  ReturnsGenerator g;
  g.vol = Vector::Constant(N, 0.02);
  return g;
}

ReturnsTable synthetic_returns(std::uint64_t seed, std::size_t T,
                               const ReturnsGenerator& gen) {
  const Eigen::Index N = gen.vol.size();
  if (N < 1) throw ConfigError("synthetic_returns: empty vol vector");
  if (!(gen.correlation > -1.0 / double(std::max<Eigen::Index>(N - 1, 1)) &&
        gen.correlation < 1.0)) {
    throw ConfigError("synthetic_returns: correlation out of range");
  }
  if (!(std::abs(gen.signal_persistence) < 1.0)) {
    throw ConfigError("synthetic_returns: signal persistence must be below 1");
  }
  Matrix corr = Matrix::Constant(N, N, gen.correlation);
  corr.diagonal().setOnes();
  const Matrix L = chol_upper(SymMatrix(corr)).transpose();

  Engine eng = make_engine(seed, "returns");
  std::normal_distribution<double> normal;
  const double phi = gen.signal_persistence;
  const double innov = std::sqrt(1.0 - phi * phi);

  Vector s(N);
  for (Eigen::Index i = 0; i < N; ++i) s(i) = normal(eng);
  ReturnsTable t;
  t.returns.resize(static_cast<Eigen::Index>(T), N);
  Vector e(N);
  for (std::size_t k = 0; k < T; ++k) {
    for (Eigen::Index i = 0; i < N; ++i) e(i) = normal(eng);
    const Vector ret = gen.vol.asDiagonal() * (gen.signal_strength * s + L * e);
    t.returns.row(static_cast<Eigen::Index>(k)) = ret.transpose();
    for (Eigen::Index i = 0; i < N; ++i) s(i) = phi * s(i) + innov * normal(eng);
    t.dates.push_back(std::to_string(k));
  }
  for (Eigen::Index i = 0; i < N; ++i) t.assets.push_back("asset" + std::to_string(i));
  return t;
}

SymMatrix generator_covariance(const ReturnsGenerator& gen) {
  const Eigen::Index N = gen.vol.size();
  Matrix corr = Matrix::Constant(N, N, gen.correlation);
  corr.diagonal().array() = 1.0 + gen.signal_strength * gen.signal_strength;
  return SymMatrix(gen.vol.asDiagonal() * corr * gen.vol.asDiagonal());
}

PortfolioParams portfolio_params_from_returns(const ReturnsTable& table,
                                              double shrink) {
  table.validate();
  const Matrix f = synthetic_alphas(table.returns);
  const Matrix r = table.returns.middleRows(99, f.rows());
  const FactorFit fit = fit_factor_dynamics(f, r);
  if (!fit.mean_reverting) {
    throw ConfigError("portfolio: fitted factors are not mean reverting");
  }
  PortfolioParams p;
  p.N = table.returns.cols();
  p.M = f.cols();
  p.Lambda = SymMatrix::scaled_identity(p.N, 0.03);
  p.Phi = fit.Phi;
  p.Pi = fit.Pi;
  p.Sigma = estimate_cov_shrunk(table.returns, shrink);
  p.Omega = shrink_correlations(fit.Omega, shrink);
  return p;
}

}  // namespace adp
